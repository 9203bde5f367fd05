"""Runtime enforcement of API usage policies written as edit automata."""

from .catalog import ApiCatalog, ParseError, ResourceKind, bundled_path, load_catalog
from .engine import (
    EnforcementReport, InvalidConfig, ResumeUnavailable, Session, SessionConfig, dispatch,
    enforce, finalize, new_session, resume,
)
from .model import (
    ActionSignature, AnyExcept, ClassHierarchy, Emit, EmitBound, EnforcementModel, Event, Exact,
    MalformedSignature, Phase, Source, Special, State, Transition, UnknownClass, guard_matches,
    make_event, parse_signature, print_signature, signature_matches,
)
from .serialization import IllFormedTrace, load_model, load_models, load_trace, store_trace
from .validation import ValidationReport, validate_model

__version__ = "0.1.0"
