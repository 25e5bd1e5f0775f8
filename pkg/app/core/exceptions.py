from typing import List, Sequence, Tuple


class MultinomialLinkError(Exception):
    """Base class for every error raised by the model toolkit"""


class LinkDomainError(MultinomialLinkError, ValueError):
    """A probability handed to a link lies outside (0, 1)"""


class SpecError(MultinomialLinkError, ValueError):
    """Invalid model family, design or run configuration"""


class DataError(MultinomialLinkError, ValueError):
    """Malformed or inconsistent input data"""


class SingularMatrixError(MultinomialLinkError):
    """A matrix that must be inverted is numerically singular"""


class SearchLimitError(MultinomialLinkError):
    """An exhaustive search would enumerate too many candidates"""


class FitError(MultinomialLinkError):
    """Fitting could not start or could not continue"""


class InfeasibleParameterError(MultinomialLinkError):
    """
    Parameter vector outside the feasible space

    Args:
        failures: (setting index, cause) pairs, causes being
            "singular" or "nonpositive"
    """

    def __init__(self, failures: Sequence[Tuple[int, str]], message: str = ""):
        self.failures: List[Tuple[int, str]] = list(failures)
        if not message:
            described = ", ".join(f"setting {i} ({cause})" for i, cause in self.failures[:5])
            more = "" if len(self.failures) <= 5 else f" and {len(self.failures) - 5} more"
            message = f"Infeasible parameter at {described}{more}"
        super().__init__(message)
