import numpy as np
from rest_framework import serializers


class RealArrayField(serializers.Field):
    """numpy array -> list of floats; NaN is left for the renderer to map to null."""

    def to_representation(self, value):
        return [float(v) for v in np.asarray(value, dtype=float).ravel()]

    def to_internal_value(self, data):
        try:
            return np.asarray(data, dtype=float)
        except (TypeError, ValueError):
            raise serializers.ValidationError("Expected a list of numbers")


class ComplexArrayField(serializers.Field):
    def to_representation(self, value):
        value = np.asarray(value, dtype=complex).ravel()
        return {"re": [float(v) for v in value.real], "im": [float(v) for v in value.imag]}
