"""
Exception hierarchy for GridSync Screener
"""


class GridSyncError(Exception):
    """Base class for every error raised by the analysis pipeline"""
    pass


class CaseParseError(GridSyncError):
    """Raised when a case file cannot be parsed"""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f", line {line}"
            location = f" ({location})"
        super().__init__(f"{message}{location}")


class CaseValidationError(GridSyncError):
    """Raised when a case violates a structural invariant"""

    def __init__(self, report):
        self.report = report
        lines = '; '.join(f"{issue.location}: {issue.message}" for issue in report.issues)
        super().__init__(f"Invalid case: {lines}")


class DimensionError(GridSyncError):
    """Raised when array shapes do not agree"""
    pass


class SingularJacobianError(GridSyncError):
    """Raised when the power-flow Jacobian is singular (voltage collapse or infeasible dispatch)"""
    pass


class ZeroVoltageError(GridSyncError):
    """Raised when a load or GFL sits on a bus with zero voltage magnitude"""
    pass


class ZeroPivotError(GridSyncError):
    """Raised when Kron elimination meets a vanishing diagonal"""

    def __init__(self, bus, pivot):
        self.bus = bus
        self.pivot = pivot
        super().__init__(f"Zero pivot at bus {bus} (|Y_pp| = {abs(pivot):.3e}): isolated or degenerate interior node")


class InfeasibleModelError(GridSyncError):
    """Raised when no dynamic (non-GFL) generator is left to form the synchronous frequency"""
    pass


class ZeroInertiaError(GridSyncError):
    """Raised when a retained dynamic generator has M = 0"""
    pass


class EigenSolverError(GridSyncError):
    """Raised when the eigendecomposition fails or returns non-finite values"""
    pass


class HeterogeneityError(GridSyncError):
    """Raised when the homogeneous-damping shortcut is applied to unequal damping factors"""
    pass


class ResolutionError(GridSyncError):
    """Raised when the time step cannot resolve the fastest oscillatory mode"""
    pass


class SmallSignalBoundError(GridSyncError):
    """Raised when a perturbation is too large for the linear model"""
    pass


class NoEventError(GridSyncError):
    """Raised when a trace never leaves the pre-disturbance baseline"""
    pass


class ZeroCapacityError(GridSyncError):
    """Raised when capacity-weighted aggregates have zero total capacity"""
    pass


class PowerFlowDivergedError(GridSyncError):
    """Raised when a downstream step needs an equilibrium but the power flow did not converge"""
    pass


class SweepConfigError(GridSyncError):
    """Raised when sweep ranges or policies are invalid"""
    pass
