from dataclasses import dataclass, field

from core.exceptions import ParameterError

# Largest rounding excursion outside [0, 1] a rule may clamp silently.
CLAMP_TOLERANCE = 1e-12


def clamp(value):
    """Clamp an opinion into [0, 1]."""
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else value


@dataclass(frozen=True)
class ModelParams:
    """Tolerance threshold `tau`, attraction `lam` and repulsion `mu`.

    `nu` is always `lam / 2`, the share of the gap each endpoint moves on attraction.
    """
    tau: float
    lam: float
    mu: float
    nu: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ('tau', 'lam', 'mu'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ParameterError(f'{name} must be a real number, got {value!r}')
        self.check_tau()
        if not 0.0 < self.lam < 1.0:
            raise ParameterError(f'lam must lie in (0, 1), got {self.lam}')
        if not 0.0 < self.mu < 1.0:
            raise ParameterError(f'mu must lie in (0, 1), got {self.mu}')
        object.__setattr__(self, 'nu', self.lam / 2)

    def check_tau(self):
        if not 0.0 < self.tau < 1.0:
            raise ParameterError(f'tau must lie in (0, 1), got {self.tau}')

    @property
    def stopping_epsilon(self):
        """0.99 * min(tau/2, (1-tau)/2), strictly inside the absorbing range."""
        return 0.99 * min(self.tau / 2, (1 - self.tau) / 2)

    def with_tau(self, tau):
        return type(self)(**{**self.as_dict(), 'tau': tau})

    def as_dict(self):
        return {'tau': self.tau, 'lam': self.lam, 'mu': self.mu}
