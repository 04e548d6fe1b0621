"""Exception hierarchy shared by every module in the package."""


class SingleHuffError(Exception):
    """Base class for all errors raised by singlehuff."""


class InvalidConfigurationError(SingleHuffError, ValueError):
    """Inconsistent widths, dtypes or arguments."""


class MalformedInputError(SingleHuffError, ValueError):
    """Raw shard bytes that cannot be symbolized."""


class EmptyHistogramError(SingleHuffError, ValueError):
    """An operation needs at least one counted symbol."""


class SupportError(SingleHuffError, ValueError):
    """KL divergence is infinite: p puts mass where q has none."""


class CoverageError(SingleHuffError, KeyError):
    """A symbol has no codeword in the codebook."""

    def __init__(self, symbol, message=None):
        self.symbol = int(symbol)
        super().__init__(message or f"symbol {self.symbol} is not assigned a codeword")

    def __str__(self):
        return self.args[0]


class InvalidLengthsError(SingleHuffError, ValueError):
    """Code lengths violate the Kraft inequality or the 32-bit cap."""


class CodeLengthOverflowError(InvalidLengthsError):
    """A Huffman build produced a codeword longer than 32 bits."""


class TruncationError(SingleHuffError, ValueError):
    """The bit or byte stream ended before the declared content."""


class CorruptPayloadError(SingleHuffError, ValueError):
    """Bits that cannot have been produced by the encoder."""


class CorruptFrameError(CorruptPayloadError):
    """Malformed frame header, padding or length bookkeeping."""


class UnknownCodebookError(SingleHuffError, KeyError):
    """A codebook id that the registry does not hold (or has not built)."""

    def __str__(self):
        return self.args[0] if self.args else "unknown codebook"


class CorruptRegistryError(SingleHuffError, ValueError):
    """Registry bytes with bad magic, version or truncated content."""


class ShardFormatError(SingleHuffError, ValueError):
    """A .shard file or manifest that cannot be parsed."""
