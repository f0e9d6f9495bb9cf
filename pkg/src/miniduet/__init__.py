"""miniduet: a privacy-budgeted query service.

Encrypted data collection, a simulated attested enclave, and a typed
query language whose typechecker prices every query in exact
(epsilon, delta) before it may run against the signed, monotonically
decreasing privacy budget.
"""

from .checker import (QueryCert, QueryRejected, RejectReason, TypeCheckError,
                      sensitivity_of, typecheck, validate_query)
from .cost import ExtReal, PrivCost
from .enclave import (BudgetExhausted, Enclave, EnclaveConfig, HardwareRoot,
                      Quote, SignedBudget, verify_quote)
from .envelope import DecryptError, Envelope, open_envelope, seal
from .interp import Database, apply_query, evaluate
from .lang import ParseError, parse, parse_type, render, render_type

__all__ = [
    "BudgetExhausted", "Database", "DecryptError", "Enclave", "EnclaveConfig",
    "Envelope", "ExtReal", "HardwareRoot", "ParseError", "PrivCost",
    "QueryCert", "QueryRejected", "Quote", "RejectReason", "SignedBudget",
    "TypeCheckError", "apply_query", "evaluate", "open_envelope", "parse",
    "parse_type", "render", "render_type", "seal", "sensitivity_of",
    "typecheck", "validate_query", "verify_quote",
]
