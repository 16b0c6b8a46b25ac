"""
Decoder

Multi-agent joint decoder: recurrent anchor-free proposals, anchor-based
refinement, and the world-frame JointPrediction.
"""

from decoder.attention import DecoderRelations, ModeAttentionStack, decoder_relations
from decoder.joint import DecoderOutput, JointDecoder, JointPrediction, local_to_world
from decoder.stages import SCALE_FLOOR, ProposalModule, RefinementModule, StageOutput

__all__ = [
    "SCALE_FLOOR",
    "DecoderOutput",
    "DecoderRelations",
    "JointDecoder",
    "JointPrediction",
    "ModeAttentionStack",
    "ProposalModule",
    "RefinementModule",
    "StageOutput",
    "decoder_relations",
    "local_to_world",
]
