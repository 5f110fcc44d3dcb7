"""Run configuration shared by every stage of the pipeline."""

from dataclasses import asdict, dataclass

from .errors import ParameterError

MODES = ("batch", "progressive", "parametric")


@dataclass(frozen=True)
class RunConfig:
    """All hyperparameters for a run.

    ``m`` is the number of negative samples drawn per firing edge and
    ``epochs`` the epoch budget; the learning rate decays linearly from 1
    to 0 over that budget.
    """

    k: int = 15
    a: float = 1.929
    b: float = 0.7915
    m: int = 5
    eps: float = 0.001
    epochs: int = 200
    dim: int = 2
    seed: int = 0
    densmap_lambda: float = 0.0
    update_negatives: bool = False
    effective_weights: bool = False
    grad_clip: float | None = 4.0
    mode: str = "batch"
    # progressive mode
    batch_size: int = 100
    stream_epochs: int = 50
    stream_lr: float = 0.3
    stream_update_positives: bool = False
    init_noise: float = 1e-2
    # parametric mode
    hidden: int = 100
    param_batch: int = 50
    lr: float = 1e-3
    momentum: float = 0.9
    track_loss: bool = True

    def validate(self):
        if self.k < 2:
            raise ParameterError(f"k must be >= 2 (log2(k) target), got {self.k}")
        if not self.a > 0 or not self.b > 0:
            raise ParameterError(f"kernel shape needs a > 0 and b > 0, got a={self.a}, b={self.b}")
        if self.m < 0:
            raise ParameterError(f"negative-sample count must be >= 0, got {self.m}")
        if not self.eps > 0:
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.dim < 1:
            raise ParameterError(f"embedding dimension must be >= 1, got {self.dim}")
        if self.densmap_lambda < 0:
            raise ParameterError(f"densmap lambda must be >= 0, got {self.densmap_lambda}")
        if self.effective_weights and not self.update_negatives:
            raise ParameterError("effective_weights requires update_negatives")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ParameterError(f"grad_clip must be positive or None, got {self.grad_clip}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1 or self.param_batch < 1:
            raise ParameterError("batch sizes must be >= 1")
        if self.stream_epochs < 1 or not self.stream_lr > 0:
            raise ParameterError("stream_epochs must be >= 1 and stream_lr > 0")
        if self.init_noise < 0:
            raise ParameterError("init_noise must be >= 0")
        if self.hidden < 1 or not self.lr > 0 or not 0 <= self.momentum < 1:
            raise ParameterError("parametric mode needs hidden >= 1, lr > 0, 0 <= momentum < 1")
        return self

    def check_data(self, n, d):
        """Constraints that depend on the dataset shape."""
        if self.k >= n:
            raise ParameterError(f"k={self.k} must be smaller than the number of points n={n}")
        if self.dim >= n:
            raise ParameterError(f"embedding dimension {self.dim} must be smaller than n={n}")
        if self.dim >= d:
            raise ParameterError(f"embedding dimension {self.dim} must be smaller than input dimension d={d}")
        if self.mode == "parametric" and self.param_batch > n:
            raise ParameterError(f"parametric batch {self.param_batch} exceeds n={n}")

    def as_dict(self):
        return asdict(self)
