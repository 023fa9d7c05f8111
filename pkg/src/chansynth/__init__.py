"""Exact channel synthesis for discrete memoryless channels."""

from .codes import (BitReader, BitString, BitWriter, HuffmanCode, golomb_decode, golomb_encode,
                    golomb_param_for, huffman_build, huffman_decode, huffman_encode)
from .dmc import (Dmc, bec, bsc, identity, is_singular, llr_table, load_channel, marginal_y,
                  mutual_information, validate_dmc)
from .errors import *  # noqa: F401,F403
from .llr import (BarTriple, GammaPmf, Quantizer, bar_triple, cond_gamma_given_triple,
                  gamma_given_xtype, gamma_marginal, llr_model, quantize, triple_marginal,
                  xtype_of)
from .rejection import (AcceptRule, CodebookStream, CounterRng, FilteredCodebook, rs_sample,
                        stream_word)
from .scheme import (SchemeConfig, SchemeTrace, Transcript, baseline_decode, baseline_encode,
                     decode, encode)

__version__ = "0.1.0"
