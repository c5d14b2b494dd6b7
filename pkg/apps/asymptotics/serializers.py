import numpy as np
from rest_framework import serializers

from apps.core.serializers import ComplexArrayField, RealArrayField


class ModScatReportSerializer(serializers.Serializer):
    """
    JSON view of a ModScatReport (w snapshots are summarized by the final estimate)
    """

    sign = serializers.IntegerField()
    ts = RealArrayField()
    ks_probe = RealArrayField()
    W_inf_estimate = ComplexArrayField()
    residual_times = RealArrayField()
    ode_residual_norms = RealArrayField()
    gap_times = RealArrayField()
    cauchy_gaps = RealArrayField()
    fitted_rho = serializers.FloatField()
    excluded_low_k = serializers.IntegerField()
    modulus_defect = serializers.SerializerMethodField()

    def get_modulus_defect(self, report):
        # |w| = |f~| holds pointwise; recorded against the context profile when one is given
        profile = self.context.get("profile")
        if profile is None:
            return None
        index = np.searchsorted(profile.ks, report.ks_probe)
        index = np.clip(index, 0, profile.ks.size - 1)
        return float(np.max(np.abs(np.abs(report.w_snapshots) - np.abs(profile.f_tilde_snapshots[:, index]))))
