"""Figure rendering for the waves harness CSV/JSON outputs."""

__version__ = "0.1.0"

from .figures import plot_convergence, plot_decay, plot_profile, plot_scan
from .schemas import SchemaMismatch

__all__ = ["plot_decay", "plot_profile", "plot_convergence", "plot_scan",
           "SchemaMismatch"]
