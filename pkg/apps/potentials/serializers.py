from rest_framework import serializers


class PotentialSummarySerializer(serializers.Serializer):
    """
    Report view of a Potential (no samples)
    """

    kind = serializers.CharField(source="kind.value")
    description = serializers.CharField(source="describe")
    params = serializers.DictField(child=serializers.FloatField())
    gamma_norms = serializers.SerializerMethodField()
    allow_signed = serializers.BooleanField()

    def get_gamma_norms(self, potential):
        return {f"{gamma:g}": value for gamma, value in sorted(potential.gamma_norms.items())}
