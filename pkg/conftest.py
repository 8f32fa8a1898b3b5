#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import os
import sys

# eyf.py and lib/ are imported from the repository root
sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)))
