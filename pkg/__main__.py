#!/usr/bin/env python3
"""
Registers point clouds, generates synthetic scene pairs and benchmarks correspondence modes

Usage:

    python3 . register --query query.cogp --ref reference.cogp --out pose.json
    python3 . synth --spec spec.json --out scenes/ --count 10
    python3 . bench --scenes scenes/ --modes argmax,softmax,uniform_ot,confidence_ot --report report.json
    python3 . eval --pose pose.json --gt scenes/scene_0000/gt.json

"""

import sys

from modules.Cli import main

if __name__ == '__main__':
    sys.exit(main())
