#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
from sys import version_info

import numpy as np

if version_info >= (3, 9):
  List = list
  Tuple = tuple
  Dict = dict
  from beartype.typing import Optional, Union, Sequence
else:
  from typing import List, Tuple, Dict, Optional, Union, Sequence

# Plain python numbers and numpy scalars are both accepted where a real is
# expected (beartype does not apply the implicit int -> float promotion).
Real = Union[int, float, np.integer, np.floating]
RealOrArray = Union[int, float, np.integer, np.floating, np.ndarray]
