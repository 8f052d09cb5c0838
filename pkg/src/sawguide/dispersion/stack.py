from __future__ import annotations

from dataclasses import dataclass, replace

from sawguide.materials import MaterialTensors, lookup_material

TOP_BCS = ("free_open", "free_shorted")


@dataclass(frozen=True)
class Layer:
    material: MaterialTensors
    thickness: float

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"layer thickness must be > 0, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Layers listed from the top surface downward on a half-space substrate."""

    layers: tuple
    substrate: MaterialTensors
    top_bc: str = "free_open"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.top_bc not in TOP_BCS:
            raise ValueError(f"top_bc must be one of {TOP_BCS}, got {self.top_bc!r}")

    @property
    def total_thickness(self):
        return sum(l.thickness for l in self.layers)

    @property
    def media(self):
        return [l.material for l in self.layers] + [self.substrate]

    def with_bc(self, top_bc):
        return replace(self, top_bc=top_bc)

    def scaled(self, factor):
        return replace(self, layers=tuple(Layer(l.material, l.thickness * factor)
                                          for l in self.layers))

    def with_first_thickness(self, thickness):
        if not self.layers:
            raise ValueError("stack has no layer to resize")
        first = Layer(self.layers[0].material, thickness)
        return replace(self, layers=(first,) + self.layers[1:])

    def without_piezoelectricity(self):
        import numpy as np

        def strip(m):
            return m.with_changes(piezo_stress=np.zeros((3, 6)))

        return replace(self, layers=tuple(Layer(strip(l.material), l.thickness)
                                          for l in self.layers),
                       substrate=strip(self.substrate))


def stack_from_dict(d, database=None):
    """Build a stack from ``{"layers": [{"material", "thickness"}], "substrate", "top_bc"}``."""
    layers = [Layer(lookup_material(l["material"], database), float(l["thickness"]))
              for l in d.get("layers", [])]
    return LayerStack(layers, lookup_material(d["substrate"], database),
                      d.get("top_bc", "free_open"))
