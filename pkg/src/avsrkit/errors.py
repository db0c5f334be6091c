"""Exception and warning types shared across the toolkit."""


class AvsrKitError(Exception):
    """Base class for all toolkit errors."""


# --- vocabulary ---------------------------------------------------------


class UnknownCharacterError(AvsrKitError, ValueError):
    """Text contains a character outside the vocabulary."""

    def __init__(self, char: str, position: int):
        self.char = char
        self.position = position
        super().__init__(f"character {char!r} at position {position} is not in the vocabulary")


class BlankInTextError(AvsrKitError, ValueError):
    """A blank token id appeared where decodable text was expected."""


# --- CTC lattice --------------------------------------------------------


class EmptyGridError(AvsrKitError, ValueError):
    """Posterior grid has zero frames."""


class UnalignableError(AvsrKitError, ValueError):
    """Grid is too short to emit the target under CTC collapse rules."""


class BlankExtensionError(AvsrKitError, ValueError):
    """Attempted to extend a prefix with the blank symbol."""


# --- scorers ------------------------------------------------------------


class ContextMismatchError(AvsrKitError, ValueError):
    """Scorer was started with a context it was not built for."""


class BlankTokenError(AvsrKitError, ValueError):
    """Scorer was stepped with the blank symbol."""


class LengthMismatchError(AvsrKitError, ValueError):
    """Prediction matrix length does not match the target length."""


# --- decoder ------------------------------------------------------------


class ScorerMismatchError(AvsrKitError, ValueError):
    """Scorer is incompatible with the decoder's vocabulary."""


class EmptyResultError(AvsrKitError, RuntimeError):
    """Search finished with no complete hypothesis, even after fallback."""


class SearchSpaceTooLargeError(AvsrKitError, ValueError):
    """Exhaustive enumeration was requested on an intractable instance."""


# --- stream fusion ------------------------------------------------------


class FrameCountMismatchError(AvsrKitError, ValueError):
    """Modalities to be fused have different frame counts."""


class RateMismatchError(AvsrKitError, ValueError):
    """Sequences or signals have incompatible rates."""


class InfeasiblePlanError(AvsrKitError, ValueError):
    """Sample count cannot be aligned to the visual frame count."""


class OddFrameCountError(AvsrKitError, ValueError):
    """Stride-2 downsampling needs an even number of input frames."""


class DegenerateFrameWarning(UserWarning):
    """A frame was constant, so its normalization is epsilon-dominated."""


# --- audio --------------------------------------------------------------


class ConstantSignalError(AvsrKitError, ValueError):
    """Signal has zero variance and cannot be normalized."""


class SilentNoiseError(AvsrKitError, ValueError):
    """Noise has zero power and cannot be scaled to a target SNR."""


class InsufficientSourcesError(AvsrKitError, ValueError):
    """Not enough distinct source signals for noise synthesis."""


class SourceTooShortError(AvsrKitError, ValueError):
    """A noise source is shorter than the required crop length."""


# --- landmarks ----------------------------------------------------------


class AllInvalidError(AvsrKitError, ValueError):
    """Landmark track has no valid frame to interpolate from."""


class DegenerateSourceError(AvsrKitError, ValueError):
    """Source point set is coincident; similarity transform is undefined."""


class BoundsError(AvsrKitError, ValueError):
    """Crop plan reaches outside the frame tensor."""


class OutOfFrameWarning(UserWarning):
    """Mouth ROI exceeded the image bounds and was clamped."""


# --- evaluation ---------------------------------------------------------


class EmptyReferenceError(AvsrKitError, ZeroDivisionError):
    """WER is undefined for an empty reference."""
