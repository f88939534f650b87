#!/usr/bin/env python3
"""One-off oracle: slippy-map tile index for the Florence reference point.

Evaluates the OSM tile formula with Python's math module, independently of
the C++ implementation, and writes the golden JSON consumed by the tests.
"""
import json
import math
import sys

lon, lat, z = 11.2558, 43.7696, 18
n = 2 ** z
phi = math.radians(lat)
x = int(math.floor((lon + 180.0) / 360.0 * n))
y = int(math.floor((1.0 - math.log(math.tan(phi) + 1.0 / math.cos(phi)) / math.pi) / 2.0 * n))
out = {"lon": lon, "lat": lat, "z": z, "x": x, "y": y}
json.dump(out, sys.stdout, indent=2)
sys.stdout.write("\n")
