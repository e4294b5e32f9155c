"""Version parsing and ordering.

Versions follow ``major.minor.patch[-tag]``. Ordering is numeric on the
three components, left to right. The tag only breaks ties between versions
with identical numeric components: tags compare lexicographically and an
untagged version sorts above any tagged one.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional

from .errors import UnparseableVersion

__all__ = ["Version", "parse_version", "compare", "is_semver_compatible"]


@functools.total_ordering
@dataclass(frozen=True)
class Version:
    major: int
    minor: int = 0
    patch: int = 0
    tag: Optional[str] = None

    def __post_init__(self):
        if min(self.major, self.minor, self.patch) < 0:
            raise ValueError("version components must be non-negative")

    @property
    def sort_key(self):
        return (self.major, self.minor, self.patch, self.tag is None, self.tag or "")

    def __lt__(self, other):
        if not isinstance(other, Version):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __str__(self):
        core = f"{self.major}.{self.minor}.{self.patch}"
        return core if self.tag is None else f"{core}-{self.tag}"


def _leading_digits(part: str) -> str:
    end = 0
    while end < len(part) and part[end].isdigit():
        end += 1
    return part[:end]


@functools.lru_cache(maxsize=65536)
def parse_version(text: str) -> Version:
    """Parse ``text`` into a :class:`Version`.

    Missing minor/patch components default to 0, so ``"1.2"`` parses as
    ``1.2.0``. Anything after the first ``-`` is the tag. Trailing
    non-numeric material in the dotted part (``2.5.RELEASE``, ``1.2b3``,
    a fourth component) is folded into the tag as well.

    Raises :class:`UnparseableVersion` when the text is empty or the first
    component is not numeric.
    """
    if not isinstance(text, str) or not text.strip():
        raise UnparseableVersion(f"empty version string: {text!r}")
    text = text.strip()
    main, sep, tag = text.partition("-")
    parts = main.split(".")
    if not parts[0].isdigit():
        raise UnparseableVersion(f"first component of {text!r} is not numeric")

    nums = []
    leftover = ""
    for i, part in enumerate(parts):
        if len(nums) < 3 and part.isdigit():
            nums.append(int(part))
            continue
        digits = _leading_digits(part) if len(nums) < 3 else ""
        if digits:
            nums.append(int(digits))
            rest = [part[len(digits):]] + parts[i + 1:]
        else:
            rest = parts[i:]
        leftover = ".".join(rest).lstrip(".")
        break

    if leftover and sep:
        tag = f"{leftover}-{tag}"
    elif leftover:
        tag = leftover
    nums += [0] * (3 - len(nums))
    return Version(nums[0], nums[1], nums[2], tag or None)


def compare(a: Version, b: Version) -> int:
    """Return -1, 0 or 1 as ``a`` is less than, equal to or greater than ``b``."""
    ka, kb = a.sort_key, b.sort_key
    return (ka > kb) - (ka < kb)


def is_semver_compatible(from_version: Version, to_version: Version) -> bool:
    """True when moving from ``from_version`` to ``to_version`` is a minor/patch upgrade."""
    return to_version.major == from_version.major and to_version > from_version
