"""Byzantine agreement protocols for synchronous networks where nodes know
only their own identifier, plus an adversarial simulator to exercise them."""
from .core import (BOTTOM, BROADCAST, NodeId, ProtocolError, RoundInbox,
                   SenderRegistry, absorb_round, ge_one_third, ge_two_thirds)
from .broadcast import Accepted, RbNode, rb_init, rb_step
from .rotor import OpinionAccepted, RotorNode, Terminated, rotor_init, rotor_step
from .consensus import ConsensusNode, Decided, consensus_init, consensus_step
from .approx import ApproxNode, aa_iterate, aa_output, aa_trim
from .parallel import PairOutput, PcNode, pc_adopt, pc_start, pc_step
from .dynamic import DynamicNode, JoinFailed, dto_step, is_final, join, leave

__version__ = "0.1.0"
