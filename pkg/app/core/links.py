"""
Link functions for multinomial link models.

Each link g maps a probability in (0, 1) onto the real line; the model only
ever needs g itself (initial estimates), its inverse g^{-1} (probabilities
from linear predictors) and the derivative of the inverse (score and Fisher
information). All three are vectorised over numpy arrays.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import special, stats

from .config import settings
from .exceptions import LinkDomainError, SpecError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

_TINY = np.finfo(float).tiny
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class LinkKind(str, Enum):
    LOGIT = "logit"
    PROBIT = "probit"
    LOGLOG = "loglog"
    CLOGLOG = "cloglog"
    CAUCHIT = "cauchit"
    T = "t"


@dataclass(frozen=True)
class LinkFunction:
    """
    A link g with its inverse and the derivative of its inverse

    Args:
        kind: Link family
        nu: Degrees of freedom, only for the t link
    """
    kind: LinkKind
    nu: Optional[float] = None

    def __post_init__(self):
        if self.kind is LinkKind.T:
            if self.nu is None or not math.isfinite(self.nu) or self.nu <= 0:
                raise SpecError(f"t link needs a positive finite degrees of freedom, got {self.nu}")
        elif self.nu is not None:
            raise SpecError(f"Degrees of freedom only apply to the t link, not {self.kind.value}")

    @property
    def name(self) -> str:
        if self.kind is LinkKind.T:
            return f"t:{self.nu:g}"
        return self.kind.value

    def __str__(self) -> str:
        return self.name

    def g(self, rho: ArrayLike) -> np.ndarray:
        """Link function eta = g(rho); rho must lie strictly inside (0, 1)"""
        r = np.asarray(rho, dtype=float)
        if not np.all((r > 0.0) & (r < 1.0)):
            raise LinkDomainError(f"{self.name} link needs probabilities in (0, 1), got {rho}")

        kind = self.kind
        if kind is LinkKind.LOGIT:
            out = special.logit(r)
        elif kind is LinkKind.PROBIT:
            out = special.ndtri(r)
        elif kind is LinkKind.LOGLOG:
            out = -np.log(-np.log(r))
        elif kind is LinkKind.CLOGLOG:
            out = np.log(-np.log1p(-r))
        elif kind is LinkKind.CAUCHIT:
            out = np.tan(np.pi * (r - 0.5))
        else:
            out = special.stdtrit(self.nu, r)
        return out

    def ginv(self, eta: ArrayLike) -> np.ndarray:
        """Inverse link rho = g^{-1}(eta), clamped away from 0 and 1"""
        e = np.asarray(eta, dtype=float)
        kind = self.kind
        if kind is LinkKind.LOGIT:
            out = special.expit(e)
        elif kind is LinkKind.PROBIT:
            out = special.ndtr(e)
        elif kind is LinkKind.LOGLOG:
            # log rho = -exp(-eta); overflow gives rho = 0 before the clamp
            with np.errstate(over="ignore"):
                out = np.exp(-np.exp(-e))
        elif kind is LinkKind.CLOGLOG:
            with np.errstate(over="ignore"):
                out = -np.expm1(-np.exp(e))
        elif kind is LinkKind.CAUCHIT:
            out = 0.5 + np.arctan(e) / np.pi
        else:
            out = special.stdtr(self.nu, e)
        clamp = settings.PROB_CLAMP
        return np.clip(out, clamp, 1.0 - clamp)

    def log_ginv_prime(self, eta: ArrayLike) -> np.ndarray:
        """
        Log of the inverse-link derivative

        Evaluated in log space so it stays exact far into the tails, where the
        derivative itself underflows.
        """
        e = np.asarray(eta, dtype=float)
        kind = self.kind
        if kind is LinkKind.LOGIT:
            a = np.abs(e)
            return -a - 2.0 * np.log1p(np.exp(-a))
        if kind is LinkKind.PROBIT:
            return -0.5 * e * e - _LOG_SQRT_2PI
        if kind is LinkKind.CAUCHIT:
            return -math.log(math.pi) - np.log1p(e * e)
        if kind is LinkKind.T:
            return stats.t.logpdf(e, self.nu)
        # Gumbel densities: loglog at eta is cloglog at -eta
        u = -e if kind is LinkKind.LOGLOG else e
        with np.errstate(over="ignore"):
            return u - np.exp(u)

    def ginv_prime(self, eta: ArrayLike) -> np.ndarray:
        """Derivative of the inverse link, floored at the smallest positive float"""
        return np.maximum(np.exp(self.log_ginv_prime(eta)), _TINY)


def parse_link(name: str) -> LinkFunction:
    """
    Parse a link name as written in config files

    Args:
        name: "logit", "probit", "loglog", "cloglog", "cauchit" or "t:<nu>"

    Returns:
        The matching LinkFunction

    Raises:
        SpecError: If the name is not recognised
    """
    text = name.strip().lower()
    if text.startswith("t:"):
        try:
            nu = float(text[2:])
        except ValueError:
            raise SpecError(f"Invalid degrees of freedom in link name: {name}")
        return LinkFunction(LinkKind.T, nu)
    try:
        kind = LinkKind(text)
    except ValueError:
        raise SpecError(f"Unknown link function: {name}")
    if kind is LinkKind.T:
        raise SpecError("The t link needs its degrees of freedom, e.g. 't:7'")
    return LinkFunction(kind)


def parse_links(names: Sequence[str]) -> List[LinkFunction]:
    return [parse_link(n) for n in names]


def supported_link_names() -> List[str]:
    return [k.value for k in LinkKind if k is not LinkKind.T] + ["t:<nu>"]


LOGIT = LinkFunction(LinkKind.LOGIT)


def eval_g(link: LinkFunction, rho: ArrayLike) -> np.ndarray:
    return link.g(rho)


def eval_ginv(link: LinkFunction, eta: ArrayLike) -> np.ndarray:
    return link.ginv(eta)


def eval_ginv_prime(link: LinkFunction, eta: ArrayLike) -> np.ndarray:
    return link.ginv_prime(eta)
