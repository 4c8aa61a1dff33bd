"""

Utility functions, input, patch and field specifications etc.

Patch specs look like "umbilical:n=2,q=2,r=1" (append ",fd=1" to force
finite-difference derivatives); field specs like
"bump:amp=0.1,width=1,c0=3.14,c1=3.14,dir=1;0;0".

"""
import os
from typing import Any, Callable, Dict, List, Tuple

from gallery import GALLERY, GalleryEntry, sphere_in_sphere
from input import Input, JSONInput
from minimality import BumpField
from multiindex import MultiIndex
from patches import (
    CatenoidPatch,
    PlanePatch,
    ProductTorus,
    RevolutionTorus,
    SphereInSpherePatch,
    UmbilicalSpherePatch,
    VeronesePatch,
)
from submanifold import FiniteDifferencePatch, ImmersedPatch


def get_gallery_entry(entry_name: str) -> GalleryEntry:
    """
    Returns the gallery entry registered under the provided name.

    Args:
        entry_name (str): The name of the entry.

    Returns:
        GalleryEntry: A fresh instance of the entry.

    Raises:
        ValueError: If the entry name is not registered.
    """
    factory = GALLERY.get(entry_name.lower())
    if factory is None:
        raise ValueError(f"Gallery entry '{entry_name}' is not supported (see 'gallery list').")
    return factory()


def get_input_processor(input_file: str) -> Input:
    """
    Identifies the input file type and returns the appropriate Input object.

    Args:
        input_file (str): Path to the input file.

    Returns:
        Input: An instance of the appropriate Input subclass.

    Raises:
        NotImplementedError: If the file type is not supported.
    """
    file_extension = os.path.splitext(input_file)[1].lower()

    if file_extension == '.json':
        return JSONInput(input_file)
    else:
        raise NotImplementedError(f"File type '{file_extension}' is not supported.")


def _split_spec(spec: str) -> Tuple[str, Dict[str, str]]:
    name, _, rest = spec.partition(":")
    options = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Malformed option '{item}' in '{spec}' (expected key=value)")
        options[key.strip()] = value.strip()
    return name.strip().lower(), options


def _sphere_in_sphere_patch(**kwargs) -> ImmersedPatch:
    if "rho" in kwargs:
        return SphereInSpherePatch(**kwargs)
    return sphere_in_sphere(**kwargs)[0]


PATCHES: Dict[str, Tuple[Callable[..., ImmersedPatch], Dict[str, Callable[[str], Any]]]] = {
    "plane": (PlanePatch, {"n": int, "q": int, "size": float}),
    "umbilical": (UmbilicalSpherePatch, {"n": int, "q": int, "r": float}),
    "sphere_in_sphere": (_sphere_in_sphere_patch, {"n": int, "q": int, "r": float, "rho": float, "k": int}),
    "revolution_torus": (RevolutionTorus, {"a": float, "R": float}),
    "product_torus": (ProductTorus, {"a": float, "b": float}),
    "catenoid": (CatenoidPatch, {"c": float, "height": float}),
    "veronese": (VeronesePatch, {"oracle_points": int, "seed": int}),
}


def parse_patch(spec: str) -> ImmersedPatch:
    """
    Build a patch from a spec string.

    Raises:
        ValueError: For an unknown patch, an unknown option or a bad value.
    """
    name, options = _split_spec(spec)
    if name not in PATCHES:
        raise ValueError(f"Patch '{name}' is not supported; choose from {sorted(PATCHES)}")
    constructor, types = PATCHES[name]
    fd = options.pop("fd", "0") not in ("0", "false", "")
    unknown = set(options) - set(types)
    if unknown:
        raise ValueError(f"Patch '{name}' does not take {sorted(unknown)}")
    try:
        kwargs = {key: types[key](value) for key, value in options.items()}
    except ValueError:
        raise ValueError(f"Bad numeric value in patch spec '{spec}'")
    if name == "sphere_in_sphere" and "rho" in kwargs:
        kwargs.pop("k", None)
    patch = constructor(**kwargs)
    return FiniteDifferencePatch(patch) if fd else patch


def parse_field(spec: str, n: int) -> BumpField:
    """
    Build a bump field from "bump:amp=..,width=..,c0=..,dir=a;b;c".

    Raises:
        ValueError: For another field kind or a malformed option.
    """
    name, options = _split_spec(spec)
    if name != "bump":
        raise ValueError(f"Variation field '{name}' is not supported (use 'bump')")
    try:
        amplitude = float(options.pop("amp", 0.1))
        width = float(options.pop("width", 1.0))
        centers = [options.pop(f"c{i}", None) for i in range(n)]
        direction = options.pop("dir", None)
        center = None if all(c is None for c in centers) else [float(c) for c in centers]
        direction = None if direction is None else [float(v) for v in direction.split(";")]
    except (TypeError, ValueError):
        raise ValueError(f"Bad value in field spec '{spec}' (centers need all of c0..c{n - 1})")
    if options:
        raise ValueError(f"Field spec does not take {sorted(options)}")
    return BumpField(amplitude, width, center, direction)


def parse_index(text: str) -> MultiIndex:
    return MultiIndex.parse(text)


def parse_floats(text: str) -> List[float]:
    """
    "1e-2,5e-3" -> [0.01, 0.005].
    """
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"Expected comma separated numbers, got '{text}'")
