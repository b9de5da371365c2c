"""Regenerate the shipped domain fixtures under src/catlin_gh/data/."""

from pathlib import Path

from catlin_gh.fixtures import build_egg, dump_domain

DATA = Path(__file__).resolve().parents[1] / "src" / "catlin_gh" / "data"

if __name__ == "__main__":
    for k in (1, 2, 3):
        dom = build_egg(k)
        dump_domain(dom, DATA / f"{dom.name}.yaml")
        print("wrote", dom.name)
