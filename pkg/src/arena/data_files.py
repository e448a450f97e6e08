"""Access to the shipped catalog, layouts, affordance and device tables."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from .scene import Catalog, SceneLayout, load_catalog, load_layout

DATA_DIR = Path(__file__).parent / "data"
LAYOUT_DIR = DATA_DIR / "layouts"


def catalog_path() -> Path:
    return DATA_DIR / "catalog.json"


def layout_path(layout_id: str) -> Path:
    return LAYOUT_DIR / f"{layout_id}.json"


def layout_ids() -> list[str]:
    return sorted(p.stem for p in LAYOUT_DIR.glob("*.json"))


@lru_cache(maxsize=1)
def default_catalog() -> Catalog:
    return load_catalog(catalog_path())


@lru_cache(maxsize=None)
def default_layout(layout_id: str) -> SceneLayout:
    path = layout_path(layout_id)
    if not path.exists():
        raise FileNotFoundError(f"no shipped layout {layout_id!r}")
    return load_layout(path)


def synonyms_path() -> Path:
    return DATA_DIR / "synonyms.txt"
