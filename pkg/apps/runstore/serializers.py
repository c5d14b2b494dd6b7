from dataclasses import asdict

from django.conf import settings
from rest_framework import serializers

from apps.core.grid import Grid
from apps.evolve.models import DataShape, Sign
from .models import EvolutionSpec, ExperimentSpec, PotentialSpec, RunConfig

POTENTIAL_KINDS = ("barrier", "zero", "gaussian", "sampled")


def _lab(section, key):
    return lambda: settings.SPECTRAL_LAB[section][key]


class CsvFloatField(serializers.Field):
    """Comma-separated numbers <-> tuple of floats"""

    default_error_messages = {"invalid": "Expected comma-separated numbers."}

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part for part in (piece.strip() for piece in data.split(",")) if part]
        try:
            return tuple(float(value) for value in data)
        except (TypeError, ValueError):
            self.fail("invalid")

    def to_representation(self, value):
        return ",".join(repr(float(v)) for v in value)


class PotentialConfigSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=POTENTIAL_KINDS, default="barrier")
    height = serializers.FloatField(default=1.0)
    half_width = serializers.FloatField(default=1.0)
    amplitude = serializers.FloatField(default=1.0)
    width = serializers.FloatField(default=1.0)
    path = serializers.CharField(default="", allow_blank=True)
    allow_signed = serializers.BooleanField(default=False)

    def validate(self, attrs):
        if attrs["kind"] == "sampled" and not attrs["path"]:
            raise serializers.ValidationError({"path": "A sampled potential needs the path of an x,v CSV file."})
        if attrs["kind"] == "barrier" and attrs["half_width"] <= 0:
            raise serializers.ValidationError({"half_width": "Must be positive."})
        if attrs["kind"] == "gaussian" and attrs["width"] <= 0:
            raise serializers.ValidationError({"width": "Must be positive."})
        return attrs


class GridConfigSerializer(serializers.Serializer):
    x_half_width = serializers.FloatField(min_value=0.0, default=_lab("GRID", "X_HALF_WIDTH"))
    n_x = serializers.IntegerField(min_value=8, default=_lab("GRID", "N_X"))
    k_half_width = serializers.FloatField(min_value=0.0, default=_lab("GRID", "K_HALF_WIDTH"))
    n_k = serializers.IntegerField(min_value=8, default=_lab("GRID", "N_K"))

    def validate_n_k(self, value):
        if value % 2:
            raise serializers.ValidationError("Must be even so the k-grid is symmetric about 0.")
        return value

    def validate(self, attrs):
        for name in ("x_half_width", "k_half_width"):
            if attrs[name] <= 0:
                raise serializers.ValidationError({name: "Must be positive."})
        return attrs


class EvolutionConfigSerializer(serializers.Serializer):
    t_end = serializers.FloatField(min_value=0.0, default=_lab("EVOLUTION", "T_END"))
    dt = serializers.FloatField(default=_lab("EVOLUTION", "DT"))
    sign = serializers.ChoiceField(choices=tuple(Sign.NAMES), default="defocusing")
    eta = serializers.FloatField(min_value=0.0, default=_lab("EVOLUTION", "ETA"))
    data_shape = serializers.ChoiceField(choices=DataShape.CHOICES, default=DataShape.GAUSSIAN)
    data_width = serializers.FloatField(default=1.0)
    snapshots = CsvFloatField(default=lambda: tuple(settings.SPECTRAL_LAB["EVOLUTION"]["SNAPSHOTS"]))
    a_coeff_path = serializers.CharField(default="", allow_blank=True)

    def validate_dt(self, value):
        if value <= 0:
            raise serializers.ValidationError("Must be positive.")
        return value

    def validate_data_width(self, value):
        if value <= 0:
            raise serializers.ValidationError("Must be positive.")
        return value

    def validate_snapshots(self, value):
        if any(t < 0 for t in value):
            raise serializers.ValidationError("Snapshot times must be non-negative.")
        return tuple(sorted(set(value)))


class ExperimentConfigSerializer(serializers.Serializer):
    alpha = serializers.FloatField(min_value=0.0, default=_lab("EXPERIMENT", "ALPHA"))
    t_fit_min = serializers.FloatField(min_value=0.0, default=_lab("EXPERIMENT", "T_FIT_MIN"))
    beta = serializers.FloatField(min_value=0.0, default=1.0)
    decay_points = serializers.IntegerField(min_value=5, default=40)
    epsilons = CsvFloatField(default=(0.4, 0.2, 0.1, 0.05))
    delta_q = serializers.FloatField(default=2.0)
    oracle_points = serializers.IntegerField(min_value=1, default=64)
    pdo_refinements = serializers.IntegerField(min_value=0, max_value=4, default=2)
    measure_t = serializers.FloatField(default=0.5)
    stationary_t = serializers.FloatField(default=400.0)
    stationary_k = serializers.FloatField(default=1.0)

    def validate_epsilons(self, value):
        if not value or any(eps <= 0 for eps in value):
            raise serializers.ValidationError("Widths must be positive.")
        return value

    def validate_delta_q(self, value):
        if value <= 0:
            raise serializers.ValidationError("Must be positive.")
        return value


class RunConfigSerializer(serializers.Serializer):
    """
    Validates the nested `section.key = value` mapping of a run config

    Every section must be present (possibly empty) so field defaults are applied.
    """

    potential = PotentialConfigSerializer()
    grid = GridConfigSerializer()
    evolution = EvolutionConfigSerializer()
    experiment = ExperimentConfigSerializer()

    def create(self, validated_data):
        return RunConfig(
            potential=PotentialSpec(**validated_data["potential"]),
            grid=Grid(**validated_data["grid"]),
            evolution=EvolutionSpec(**validated_data["evolution"]),
            experiment=ExperimentSpec(**validated_data["experiment"]),
        )


SECTION_SERIALIZERS = {
    "potential": PotentialConfigSerializer,
    "grid": GridConfigSerializer,
    "evolution": EvolutionConfigSerializer,
    "experiment": ExperimentConfigSerializer,
}


def config_sections(config: RunConfig) -> dict:
    """Section name -> field values in declaration order"""
    return {
        "potential": asdict(config.potential),
        "grid": {name: getattr(config.grid, name) for name in GridConfigSerializer().fields},
        "evolution": asdict(config.evolution),
        "experiment": asdict(config.experiment),
    }


class RunManifestSerializer(serializers.Serializer):
    version = serializers.CharField()
    command = serializers.CharField(allow_blank=True)
    config = serializers.JSONField()
    outputs = serializers.DictField(child=serializers.CharField())
    timings = serializers.DictField(child=serializers.FloatField())
    checks = serializers.DictField(child=serializers.BooleanField())
    passed = serializers.BooleanField(allow_null=True)
