from rest_framework import serializers

from apps.core.serializers import RealArrayField
from .models import NormKind


class DecaySeriesSerializer(serializers.Serializer):
    ts = RealArrayField()
    norms = RealArrayField()
    norm_kind = serializers.ChoiceField(choices=NormKind.CHOICES)
    component = serializers.CharField()
    beta = serializers.FloatField()
    t_fit_min = serializers.FloatField()
    fitted_slope = serializers.FloatField()
    slope_ci = serializers.ListField(child=serializers.FloatField())


class PdoProbeSerializer(serializers.Serializer):
    """Norms per refinement level for one symbol"""

    symbol_kind = serializers.CharField()
    beta = serializers.FloatField()
    norms = RealArrayField()
    plateau = serializers.BooleanField()
