"""Function-calling task-oriented dialogue toolkit.

Domains are callable function specs, every turn runs the four-stage loop
(domain selection, state tracking, policy instruction, response generation),
dialogues export as six-role training data with per-role loss masks, and the
full MultiWOZ metric suite scores the results.
"""

__version__ = "0.1.0"

from .core import (
    Action,
    ActionFrame,
    BeliefState,
    DialogueSession,
    FunctionCall,
    Observation,
    TurnRecord,
    function_call_to_belief,
    validate_function_call,
)
from .registry import (
    FunctionRegistry,
    FunctionSpec,
    SlotSpec,
    default_registry,
    load_registry,
    render_spec,
)

__all__ = [
    "Action",
    "ActionFrame",
    "BeliefState",
    "DialogueSession",
    "FunctionCall",
    "FunctionRegistry",
    "FunctionSpec",
    "Observation",
    "SlotSpec",
    "TurnRecord",
    "default_registry",
    "function_call_to_belief",
    "load_registry",
    "render_spec",
    "validate_function_call",
    "__version__",
]
