from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ModScatReport:
    """
    Modified profile w(t, k) = exp(-i sigma/2 int_0^t |f~(s,k)|^2 ds/(1+s)) f~(t, k) on the probe frequencies

    W_inf_estimate is w at the last snapshot. cauchy_gaps[n] = max_k |w(t_{n+1}) - w(t_n)|
    over the dyadic times in gap_times. ode_residual_norms pairs with residual_times.
    """

    ts: np.ndarray
    ks_probe: np.ndarray
    w_snapshots: np.ndarray
    W_inf_estimate: np.ndarray
    sign: int = 1
    residual_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ode_residual_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cauchy_gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted_rho: float = float("nan")
    excluded_low_k: int = 0
