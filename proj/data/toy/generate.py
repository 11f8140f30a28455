# Copyright 2026 The cdiff Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the toy corpus. Output is deterministic."""

import collections
import pathlib
import random

HERE = pathlib.Path(__file__).parent

# Polite frame: the ADJ NOUN VERB on the ADJ NOUN.
SLOTS = [
    ["the", "a"],
    ["big", "happy"],
    ["cat", "dog"],
    ["sat", "ran"],
    ["on"],
    ["the", "a"],
    ["big", "happy"],
    ["mat", "cat", "dog"],
]
RUDE = ["you", "dumb", "ugly", "stupid", "jerk"]
LEVELS = [0.0, 0.0, 0.25, 0.5, 0.75, 1.0]


def main():
  rng = random.Random(7)
  counts = collections.Counter()
  for _ in range(600):
    level = rng.choice(LEVELS)
    seq = [rng.choice(RUDE) if rng.random() < level else rng.choice(slot) for slot in SLOTS]
    counts[" ".join(seq)] += 1
  with open(HERE / "corpus.txt", "w") as f:
    for seq, n in sorted(counts.items()):
      f.write(f"{seq}\t{n}\n")


if __name__ == "__main__":
  main()
