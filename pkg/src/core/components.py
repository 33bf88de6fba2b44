"""
Connected-component labelling of binary masks (4-connectivity)
"""

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from .geometry import BBox
from .masks import BinaryMask

FOUR_CONNECTIVITY = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Component:
    box: BBox
    area: int
    mask: BinaryMask


def connected_components(mask: BinaryMask, min_area: int = 0) -> List[Component]:
    """Foreground components with at least min_area pixels, ordered by (y_min, x_min)"""
    labels, count = ndimage.label(mask.data, structure=FOUR_CONNECTIVITY)
    components = []
    for label, found in enumerate(ndimage.find_objects(labels), start=1):
        if found is None:
            continue
        rows, cols = found
        area = int(np.count_nonzero(labels[found] == label))
        if area < min_area:
            continue
        box = BBox(cols.start, rows.start, cols.stop, rows.stop)
        components.append(Component(box=box, area=area, mask=BinaryMask(labels == label)))

    components.sort(key=lambda c: (c.box.y_min, c.box.x_min))
    return components
