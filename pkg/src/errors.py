"""
Exception hierarchy for the compilation toolchain.
Every error raised on purpose by the package derives from QkcError so the CLI
can map it to a single exit code.
"""

from typing import Optional


class QkcError(Exception):
    """Base class for all toolchain errors"""


class ConfigError(QkcError):
    """Configuration file could not be read"""


class CircuitError(QkcError):
    """Invalid circuit, gate or noise application"""


class CircuitParseError(CircuitError):
    """Syntax or semantic error in circuit source text"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EncodingError(QkcError):
    """Circuit element has no Bayesian network encoding"""


class CnfError(QkcError):
    pass


class InconsistentCnfError(CnfError):
    """Unit resolution derived the empty clause"""


class DimacsParseError(CnfError):
    pass


class CompileError(QkcError):
    pass


class AcParseError(CompileError):
    pass


class QueryError(QkcError):
    pass


class BindingError(QueryError):
    """Parameter binding is incomplete or does not fit the compiled circuit"""


class StaleCacheError(QueryError):
    """Downward pass requested without a matching upward pass"""


class EnumerationLimitError(QueryError):
    pass


class SamplerError(QkcError):
    pass


class OracleError(QkcError):
    pass


class WorkloadError(QkcError):
    pass
