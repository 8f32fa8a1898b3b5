#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
