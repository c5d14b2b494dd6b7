from dataclasses import dataclass

from apps.core.exceptions import ContractError


class BKind:
    GAUSSIAN = "gaussian"
    ZETA = "zeta"
    VARPI = "varpi"
    DELTA = "delta"
    PV = "pv"

    SMOOTH = (GAUSSIAN, ZETA, VARPI)
    CHOICES = SMOOTH + (DELTA, PV)


class Side:
    PLUS = "+"
    MINUS = "-"

    CHOICES = (PLUS, MINUS)


@dataclass(frozen=True)
class TrilinearSpec:
    """
    Sign triple, kernel and time of the trilinear form

        T_b(f1, f2, f3)(k) = iiint e^{it(-k^2 + l^2 - m^2 + n^2)} f1(l) conj(f2(m)) f3(n)
                             b(k + e1 l + e2 m + e3 n) dl dm dn

    A pv kernel is summed on nodes placed symmetrically about p = 0.
    """

    epsilons: tuple = (1, 1, 1)
    b_kind: str = BKind.GAUSSIAN
    t: float = 0.0

    def __post_init__(self):
        if len(self.epsilons) != 3 or any(e not in (1, -1) for e in self.epsilons):
            raise ContractError(f"epsilons must be a triple of +1/-1, got {self.epsilons!r}")
        if self.b_kind not in BKind.CHOICES:
            raise ContractError(f"b_kind must be one of {BKind.CHOICES}, got {self.b_kind!r}")

    @property
    def is_smooth(self) -> bool:
        return self.b_kind in BKind.SMOOTH
