"""Access to the bundled architecture and network fixture files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

_SUFFIXES = {"arch": ".arch", "net": ".net"}


def fixture_text(name: str, kind: str) -> str:
    """Read a bundled fixture (``eyeriss``/``simba`` arch, ``toy``/... net)."""
    suffix = _SUFFIXES[kind]
    package = resources.files("qmap") / "fixtures" / f"{name}{suffix}"
    if not package.is_file():
        raise FileNotFoundError(f"no bundled {kind} fixture named {name!r}")
    return package.read_text()


def available(kind: str) -> list[str]:
    suffix = _SUFFIXES[kind]
    root = resources.files("qmap") / "fixtures"
    return sorted(p.name.removesuffix(suffix) for p in root.iterdir() if p.name.endswith(suffix))


def resolve_text(spec: str, kind: str) -> str:
    """Treat `spec` as a path if it exists, otherwise as a bundled fixture name."""
    path = Path(spec)
    if path.exists():
        return path.read_text()
    try:
        return fixture_text(spec, kind)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"{spec!r} is neither a file nor a bundled {kind} fixture "
            f"(bundled: {', '.join(available(kind))})"
        ) from None
