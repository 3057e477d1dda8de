class CurvFlowError(Exception):
    """Base exception class for curvflow"""
    pass

class DimensionMismatchError(CurvFlowError):
    """Exception raised when tensor operands live in different dimensions"""
    pass

class NotPositiveDefiniteError(CurvFlowError):
    """Exception raised when a metric is not positive definite"""
    pass

class BianchiError(CurvFlowError):
    """Exception raised when a curvature tensor lacks the first Bianchi symmetry"""
    pass

class InsufficientDegreeError(CurvFlowError):
    """Exception raised when a jet is truncated too low for the requested derivatives"""
    pass

class ValenceError(CurvFlowError):
    """Exception raised when an operator is applied to a tensor of the wrong valence"""
    pass

class HypothesisViolationError(CurvFlowError):
    """Exception raised when the hypothesis of an inequality does not hold"""
    pass

class GramSingularError(CurvFlowError):
    """Exception raised when a reduced family degenerates"""
    pass

class DegenerateNormError(CurvFlowError):
    """Exception raised when a norm ratio has a vanishing denominator"""
    pass

class ExponentRegimeError(CurvFlowError):
    """Exception raised for exponents outside the admissible Sobolev regime"""
    pass

class MissingEulerCharacteristicError(CurvFlowError):
    """Exception raised when a topological quantity is required but unknown"""
    pass

class NoBlowupError(CurvFlowError):
    """Exception raised when rescaling a trajectory that did not blow up"""
    pass

class ConfigError(CurvFlowError):
    """Exception raised for configuration errors"""
    pass

class InvariantFailure(CurvFlowError):
    """Exception raised when an asserted invariant fails"""
    pass

class SymmetryError(CurvFlowError):
    """Exception raised when components violate a required index symmetry"""
    pass
