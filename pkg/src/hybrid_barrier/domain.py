"""Core types shared by every pricer: model parameters, contracts, results."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class PricingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParam(PricingError, ValueError):
    def __init__(self, field_name: str, reason: str):
        self.field = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


class BarrierAboveSpot(PricingError, ValueError):
    pass


class NumericalError(PricingError, ArithmeticError):
    """A numerical routine failed (singular system, no convergence, ...)."""


class PayoffKind(str, enum.Enum):
    NO_TOUCH = "NoTouch"
    DOWN_OUT_CALL = "DownOutCall"
    DOWN_OUT_PUT = "DownOutPut"


class OptionKind(str, enum.Enum):
    CALL = "Call"
    PUT = "Put"


class Method(str, enum.Enum):
    LEWIS_LIPTON = "LewisLipton"
    WILLARD_MC = "WillardMC"
    HYBRID_MHP = "HybridMHP"
    HYBRID_FDM = "HybridFDM"
    MCS2D = "MCS2D"


@dataclass(frozen=True)
class HestonParams:
    """Risk-neutral Heston parameters, all in year units.

    ``epsilon`` is the vol-of-vol, ``v0``/``theta`` are variances.
    """

    r: float
    kappa: float
    theta: float
    epsilon: float
    rho: float
    v0: float
    s0: float = 1.0

    @property
    def kappa_hat(self) -> float:
        return self.kappa - self.rho * self.epsilon / 2.0

    @property
    def feller_satisfied(self) -> bool:
        return 2.0 * self.kappa * self.theta >= self.epsilon**2

    @classmethod
    def reference_defaults(cls) -> "HestonParams":
        return cls(r=0.03, kappa=1.0, theta=0.2, epsilon=0.4, rho=-0.3, v0=0.25, s0=1.0)


def validate_params(p: HestonParams) -> None:
    """Raise :class:`InvalidParam` for the first violated invariant.

    The Feller condition is deliberately not enforced; see
    :attr:`HestonParams.feller_satisfied`.
    """
    checks = [
        ("r", math.isfinite(p.r), "must be finite"),
        ("kappa", math.isfinite(p.kappa) and p.kappa >= 0, "must be >= 0"),
        ("theta", math.isfinite(p.theta) and p.theta >= 0, "must be >= 0"),
        ("epsilon", math.isfinite(p.epsilon) and p.epsilon > 0, "must be > 0"),
        ("rho", -1.0 < p.rho < 1.0, "must lie in (-1, 1)"),
        ("v0", math.isfinite(p.v0) and p.v0 >= 0, "must be >= 0"),
        ("s0", math.isfinite(p.s0) and p.s0 > 0, "must be > 0"),
    ]
    for name, ok, reason in checks:
        if not ok:
            raise InvalidParam(name, reason)


@dataclass(frozen=True)
class BarrierContract:
    """Single lower barrier contract, continuously monitored.

    ``strike`` is ignored (and may be ``None``) for no-touch contracts.  A
    down-and-out call with K < B is allowed: every surviving path ends above
    B, so it equals the K = B call plus (B - K) no-touches.
    """

    maturity: float
    barrier: float
    payoff_kind: PayoffKind = PayoffKind.NO_TOUCH
    strike: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "payoff_kind", PayoffKind(self.payoff_kind))
        if not self.maturity > 0:
            raise InvalidParam("maturity", "must be > 0")
        if not self.barrier > 0:
            raise InvalidParam("barrier", "must be > 0")
        if self.payoff_kind is not PayoffKind.NO_TOUCH:
            if self.strike is None or not self.strike > 0:
                raise InvalidParam("strike", "required and > 0 for call/put payoffs")

    def log_barrier(self, s0: float) -> float:
        return to_log_contract(self, s0)[0]

    def log_strike(self, s0: float) -> float | None:
        return to_log_contract(self, s0)[1]


@dataclass(frozen=True)
class VanillaContract:
    maturity: float
    strike: float
    kind: OptionKind = OptionKind.CALL

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind(self.kind))
        if not self.maturity > 0:
            raise InvalidParam("maturity", "must be > 0")
        if not self.strike > 0:
            raise InvalidParam("strike", "must be > 0")


def to_log_contract(c: BarrierContract, s0: float) -> tuple[float, float | None]:
    """Return ``(xi, k) = (ln(B/s0), ln(K/s0))``; ``k`` is None without a strike."""
    if c.barrier >= s0:
        raise BarrierAboveSpot(f"barrier {c.barrier} must lie below spot {s0}")
    xi = math.log(c.barrier / s0)
    k = None if c.strike is None else math.log(c.strike / s0)
    return xi, k


@dataclass
class PricingResult:
    price: float
    std_error: float = 0.0
    n_paths: int = 1
    elapsed: float = 0.0
    method: Method = Method.LEWIS_LIPTON
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.method = Method(self.method)
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")
