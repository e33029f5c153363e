"""The bundled company/platoon/report knowledge base."""

from __future__ import annotations

from importlib import resources

from ..kb import MebnKb, loads_kb

KB_RESOURCE = "battlefield.kb"


def domain_kb_text() -> str:
    return resources.files(__package__).joinpath(KB_RESOURCE).read_text(encoding="utf-8")


def build_domain_kb() -> MebnKb:
    """Parse the bundled KB file; the result is frozen."""
    return loads_kb(domain_kb_text()).freeze()
