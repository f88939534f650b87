#!/usr/bin/env python3
"""Generate the synthetic sample city under data/sample/.

Deterministic: the same script always writes the same bytes.

    python3 tools/make_sample_data.py [--out data/sample]
"""

import argparse
import json
import math
import os
import random
import struct

WEST, NORTH = 11.2480, 43.7754
STEP = 0.0001  # degrees per DTM/DSM sample
SIDE = 65
LAT0 = NORTH - STEP * (SIDE - 1) / 2
M_LON = 111320.0 * math.cos(math.radians(LAT0))
M_LAT = 110540.0

# Road lattice
ROWS, COLS = 5, 5
R_WEST, R_NORTH = 11.2484, 43.7750
R_DLON, R_DLAT = 0.0014, 0.0011


def terrain(lon, lat):
    x = (lon - WEST) * M_LON
    y = (NORTH - lat) * M_LAT
    return 48.0 + 0.015 * x + 0.01 * y + 2.5 * math.sin(x / 90.0) * math.cos(y / 110.0)


def offset(lon, lat, dx_m, dy_m):
    return [round(lon + dx_m / M_LON, 7), round(lat + dy_m / M_LAT, 7)]


def rect(lon, lat, w, h):
    """Counter-clockwise closed ring, south-west corner at (lon, lat)."""
    return [offset(lon, lat, 0, 0), offset(lon, lat, w, 0), offset(lon, lat, w, h),
            offset(lon, lat, 0, h), offset(lon, lat, 0, 0)]


def point_in_ring(p, ring):
    inside = False
    n = len(ring) - 1
    for i in range(n):
        (x1, y1), (x2, y2) = ring[i], ring[i + 1]
        if (y1 > p[1]) != (y2 > p[1]):
            xi = x1 + (p[1] - y1) * (x2 - x1) / (y2 - y1)
            if p[0] < xi:
                inside = not inside
    return inside


def in_polygon(p, rings):
    return point_in_ring(p, rings[0]) and not any(point_in_ring(p, h) for h in rings[1:])


def write_asc(path, values):
    with open(path, "w") as f:
        f.write(f"ncols {SIDE}\nnrows {SIDE}\n")
        f.write(f"xllcenter {WEST:.7f}\nyllcenter {NORTH - STEP * (SIDE - 1):.7f}\n")
        f.write(f"cellsize {STEP}\nNODATA_value -9999\n")
        for row in values:
            f.write(" ".join(f"{v:.3f}" for v in row) + "\n")


def write_scalar_asc(path, west, north, step, rows):
    with open(path, "w") as f:
        f.write(f"ncols {len(rows[0])}\nnrows {len(rows)}\n")
        f.write(f"xllcenter {west:.7f}\nyllcenter {north - step * (len(rows) - 1):.7f}\n")
        f.write(f"cellsize {step}\nNODATA_value -9999\n")
        for row in rows:
            f.write(" ".join(f"{v:.2f}" for v in row) + "\n")


def glb(positions, indices, name):
    """Minimal binary glTF with one indexed triangle mesh."""
    pos = b"".join(struct.pack("<3f", *p) for p in positions)
    idx = b"".join(struct.pack("<I", i) for i in indices)
    binary = pos + idx
    lo = [min(p[k] for p in positions) for k in range(3)]
    hi = [max(p[k] for p in positions) for k in range(3)]
    doc = {
        "asset": {"version": "2.0", "generator": "citytwin sample"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0, "name": name}],
        "meshes": [{"primitives": [{"attributes": {"POSITION": 0}, "indices": 1}]}],
        "buffers": [{"byteLength": len(binary)}],
        "bufferViews": [
            {"buffer": 0, "byteOffset": 0, "byteLength": len(pos), "target": 34962},
            {"buffer": 0, "byteOffset": len(pos), "byteLength": len(idx), "target": 34963},
        ],
        "accessors": [
            {"bufferView": 0, "componentType": 5126, "count": len(positions), "type": "VEC3", "min": lo, "max": hi},
            {"bufferView": 1, "componentType": 5125, "count": len(indices), "type": "SCALAR"},
        ],
    }
    js = json.dumps(doc, separators=(",", ":")).encode()
    js += b" " * (-len(js) % 4)
    binary += b"\0" * (-len(binary) % 4)
    total = 12 + 8 + len(js) + 8 + len(binary)
    return (struct.pack("<III", 0x46546C67, 2, total) + struct.pack("<II", len(js), 0x4E4F534A) + js
            + struct.pack("<II", len(binary), 0x004E4942) + binary)


def pyramid_glb(base, height, name):
    b = base / 2
    pts = [(-b, 0, -b), (b, 0, -b), (b, 0, b), (-b, 0, b), (0, height, 0)]
    tris = [0, 1, 4, 1, 2, 4, 2, 3, 4, 3, 0, 4, 0, 2, 1, 0, 3, 2]
    return glb(pts, tris, name)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "sample"))
    out = os.path.normpath(ap.parse_args().out)
    os.makedirs(os.path.join(out, "models"), exist_ok=True)
    os.makedirs(os.path.join(out, "heatmaps"), exist_ok=True)
    rng = random.Random(20240611)

    # --- footprints: three buildings per road block, plus a courtyard block,
    # an L-shape and a two-part building.
    buildings = []  # (feature, height, roof) with roof = None | ("gable", eave, ridge_rise)
    bid = 0
    for r in range(ROWS - 1):
        for c in range(COLS - 1):
            lon = R_WEST + c * R_DLON
            lat = R_NORTH - (r + 1) * R_DLAT
            for k in range(3):
                bid += 1
                w = rng.choice([24.0, 28.0, 30.0])
                h = rng.choice([22.0, 26.0, 30.0])
                sw = offset(lon, lat, 8.0 + k * 34.0, 14.0 + (k % 2) * 40.0)
                ring = rect(sw[0], sw[1], w, h)
                height = round(rng.uniform(9.0, 24.0), 1)
                props = {"name": f"Building {bid}"}
                if bid % 5 == 0:
                    props["height"] = height
                roof = ("gable", height, 4.0) if bid % 7 == 3 else None
                buildings.append(({"type": "Feature", "id": f"b{bid:03d}",
                                   "geometry": {"type": "Polygon", "coordinates": [ring]},
                                   "properties": props}, height, roof))
    # Courtyard building with a hole.
    sw = offset(R_WEST, R_NORTH, 20.0, -R_DLAT * 4 * M_LAT - 80.0)
    outer = rect(sw[0], sw[1], 70.0, 56.0)
    hole_sw = offset(sw[0], sw[1], 25.0, 18.0)
    hole = rect(hole_sw[0], hole_sw[1], 20.0, 18.0)[::-1]
    buildings.append(({"type": "Feature", "id": "b-court",
                       "geometry": {"type": "Polygon", "coordinates": [outer, hole]},
                       "properties": {"name": "Courtyard"}}, 18.0, None))
    # L-shaped building.
    a = offset(R_WEST + R_DLON * 2, R_NORTH, 0, -R_DLAT * 4 * M_LAT - 80.0)
    l_ring = [a, offset(a[0], a[1], 50, 0), offset(a[0], a[1], 50, 20), offset(a[0], a[1], 20, 20),
              offset(a[0], a[1], 20, 50), offset(a[0], a[1], 0, 50), a]
    buildings.append(({"type": "Feature", "id": "b-ell",
                       "geometry": {"type": "Polygon", "coordinates": [l_ring]},
                       "properties": {"name": "L block"}}, 12.5, None))
    # Two-part building (MultiPolygon -> b-twin-1, b-twin-2).
    t = offset(R_WEST + R_DLON * 3, R_NORTH, 10, -R_DLAT * 4 * M_LAT - 80.0)
    t2 = offset(t[0], t[1], 40, 0)
    buildings.append(({"type": "Feature", "id": "b-twin",
                       "geometry": {"type": "MultiPolygon",
                                    "coordinates": [[rect(t[0], t[1], 30, 30)], [rect(t2[0], t2[1], 30, 30)]]},
                       "properties": {"name": "Twin towers", "height": 30.0}}, 30.0, None))

    with open(os.path.join(out, "footprints.geojson"), "w") as f:
        json.dump({"type": "FeatureCollection", "features": [b[0] for b in buildings]}, f, indent=1)
        f.write("\n")

    # --- DTM and DSM
    dtm, dsm = [], []
    for j in range(SIDE):
        lat = NORTH - j * STEP
        trow, srow = [], []
        for i in range(SIDE):
            lon = WEST + i * STEP
            z = terrain(lon, lat)
            s = z
            for feat, height, roof in buildings:
                g = feat["geometry"]
                polys = g["coordinates"] if g["type"] == "MultiPolygon" else [g["coordinates"]]
                if any(in_polygon((lon, lat), p) for p in polys):
                    s = z + height
                    if roof:
                        ring = polys[0][0]
                        lats = [p[1] for p in ring]
                        mid = (min(lats) + max(lats)) / 2
                        half = (max(lats) - min(lats)) / 2 * M_LAT
                        s = z + roof[1] + roof[2] * (1 - abs(lat - mid) * M_LAT / half)
                    break
            trow.append(z)
            srow.append(s)
        dtm.append(trow)
        dsm.append(srow)
    write_asc(os.path.join(out, "dtm.asc"), dtm)
    write_asc(os.path.join(out, "dsm.asc"), dsm)

    # --- roads: 5x5 lattice, 40 two-way elements (80 directed)
    def node_id(r, c):
        return f"n{r}{c}"

    def node_pos(r, c):
        return [round(R_WEST + c * R_DLON, 7), round(R_NORTH - r * R_DLAT, 7)]

    road = []
    for r in range(ROWS):
        for c in range(COLS):
            road.append({"type": "Feature", "id": node_id(r, c),
                         "geometry": {"type": "Point", "coordinates": node_pos(r, c)}, "properties": {}})
    eid = 0
    elements = []
    for r in range(ROWS):
        for c in range(COLS):
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 >= ROWS or c2 >= COLS:
                    continue
                eid += 1
                arterial = r == 2 or c == 2
                a, b = node_pos(r, c), node_pos(r2, c2)
                mid = [round((a[0] + b[0]) / 2, 7), round((a[1] + b[1]) / 2, 7)]
                e = {"type": "Feature", "id": f"e{eid:02d}",
                     "geometry": {"type": "LineString", "coordinates": [a, mid, b]},
                     "properties": {"from": node_id(r, c), "to": node_id(r2, c2),
                                    "maxspeed": 50 if arterial else 30,
                                    "name": f"{'Viale' if arterial else 'Via'} {eid}",
                                    "lanes": 2 if arterial else 1, "oneway": False}}
                road.append(e)
                elements.append(e)
    road.append({"type": "Feature", "id": "r1", "geometry": None,
                 "properties": {"feature_type": "restriction", "kind": "closed", "elements": ["e01"],
                                "active": False}})
    with open(os.path.join(out, "roads.geojson"), "w") as f:
        json.dump({"type": "FeatureCollection", "features": road}, f, indent=1)
        f.write("\n")

    # --- golden what-if scenario: block the middle of the central arterial
    # between n20 and n24, so the baseline n20 -> n24 route must detour.
    c1 = node_pos(2, 1)
    c2 = node_pos(2, 3)
    golden = {
        "from": node_pos(2, 0),
        "to": node_pos(2, 4),
        "area": {"type": "Polygon", "coordinates": [[
            [c1[0] + 0.0003, c1[1] - 0.0003], [c2[0] - 0.0003, c2[1] - 0.0003],
            [c2[0] - 0.0003, c2[1] + 0.0003], [c1[0] + 0.0003, c1[1] + 0.0003],
            [c1[0] + 0.0003, c1[1] - 0.0003]]]},
    }
    with open(os.path.join(out, "whatif_golden.json"), "w") as f:
        json.dump(golden, f, indent=1)
        f.write("\n")

    # --- traffic
    with open(os.path.join(out, "traffic.ndjson"), "w") as f:
        for k, e in enumerate(elements):
            for direction in ("", ":rev"):
                f.write(json.dumps({"element": e["id"] + direction,
                                    "density": round(rng.uniform(0.0, 1.0), 3),
                                    "timestamp": "2024-06-11T08:00:00Z"}) + "\n")

    # --- features: sensors and points of interest
    feats = []
    devices = []
    kinds = [("Environment/AirQuality", "no2"), ("Environment/AirQuality", "pm10"),
             ("Environment/Weather", "temperature"), ("Mobility/TrafficSensor", "vehicle_flow"),
             ("Environment/Weather", "humidity")]
    for k, (cat, metric) in enumerate(kinds):
        pos = [round(R_WEST + rng.uniform(0.0002, 0.0054), 7), round(R_NORTH - rng.uniform(0.0002, 0.0054), 7)]
        did = f"dev{k + 1}"
        devices.append((did, metric))
        feats.append({"type": "Feature", "id": did, "geometry": {"type": "Point", "coordinates": pos},
                      "properties": {"category": cat, "name": f"Sensor {k + 1}", "metric": metric}})
    poi_cats = ["Service/Education/School", "Service/Health/Pharmacy", "Service/Tourism/Museum",
                "Service/Mobility/BikeSharing", "Service/Culture/Library"]
    for k in range(20):
        pos = [round(R_WEST + rng.uniform(0, 0.0056), 7), round(R_NORTH - rng.uniform(0, 0.0056), 7)]
        feats.append({"type": "Feature", "id": f"poi{k + 1:02d}", "geometry": {"type": "Point", "coordinates": pos},
                      "properties": {"category": poi_cats[k % len(poi_cats)], "name": f"POI {k + 1}"}})
    feats.append({"type": "Feature", "id": "path1",
                  "geometry": {"type": "LineString", "coordinates": [node_pos(0, 0), node_pos(1, 1), node_pos(2, 2)]},
                  "properties": {"category": "Mobility/CyclePath", "name": "Cycle path"}})
    with open(os.path.join(out, "features.geojson"), "w") as f:
        json.dump({"type": "FeatureCollection", "features": feats}, f, indent=1)
        f.write("\n")
    units = {"no2": "ug/m3", "pm10": "ug/m3", "temperature": "degC", "vehicle_flow": "veh/h", "humidity": "%"}
    with open(os.path.join(out, "observations.ndjson"), "w") as f:
        for did, metric in devices:
            for hour in range(24):
                f.write(json.dumps({"device": did, "metric": metric,
                                    "value": round(rng.uniform(10, 60), 2), "unit": units[metric],
                                    "timestamp": f"2024-06-11T{hour:02d}:00:00Z"}) + "\n")

    # --- heatmaps: static NO2 and a 4-frame animated temperature
    hm_step = 0.0002
    hm_side = 33
    def field(phase):
        rows = []
        for j in range(hm_side):
            row = []
            for i in range(hm_side):
                x, y = i / (hm_side - 1), j / (hm_side - 1)
                row.append(20 + 30 * math.exp(-((x - 0.5 - 0.2 * math.cos(phase)) ** 2 + (y - 0.5) ** 2) * 8))
            rows.append(row)
        return rows
    write_scalar_asc(os.path.join(out, "heatmaps", "no2.asc"), WEST, NORTH, hm_step, field(math.pi / 2))
    for k in range(4):
        write_scalar_asc(os.path.join(out, "heatmaps", f"temperature-{k}.asc"), WEST, NORTH, hm_step,
                         field(k * math.pi / 2))

    # --- models: two building variants and one street-furniture entity
    with open(os.path.join(out, "models", "b001-detailed.glb"), "wb") as f:
        f.write(pyramid_glb(20.0, 18.0, "b001 detailed"))
    with open(os.path.join(out, "models", "b002-detailed.glb"), "wb") as f:
        f.write(pyramid_glb(24.0, 22.0, "b002 detailed"))
    with open(os.path.join(out, "models", "tree.glb"), "wb") as f:
        f.write(pyramid_glb(3.0, 6.0, "tree"))
    with open(os.path.join(out, "entities.json"), "w") as f:
        json.dump({"models": [{"id": "tree", "name": "Street tree", "path": "models/tree.glb"}]}, f, indent=1)
        f.write("\n")
    trees = [{"type": "Feature", "id": f"tree{k + 1}",
              "geometry": {"type": "Point", "coordinates": [round(R_WEST + 0.0002 + k * 0.0004, 7),
                                                            round(R_NORTH - 2 * R_DLAT + 0.00012, 7)]},
              "properties": {"model": "tree", "scale": 1.0 + 0.1 * k, "rotation_deg": 15.0 * k}}
             for k in range(6)]
    with open(os.path.join(out, "entity_instances.geojson"), "w") as f:
        json.dump({"type": "FeatureCollection", "features": trees}, f, indent=1)
        f.write("\n")

    ramp = {"interpolation": "linear",
            "stops": [{"value": 20, "color": "#2c7bb6b0"}, {"value": 35, "color": "#ffffbfc0"},
                      {"value": 50, "color": "#d7191cd0"}]}
    manifest = {"datasets": [
        {"kind": "dtm", "path": "dtm.asc", "crs": "EPSG:4326", "priority": 0},
        {"kind": "dsm", "path": "dsm.asc", "crs": "EPSG:4326", "priority": 0},
        {"kind": "footprints", "path": "footprints.geojson", "crs": "EPSG:4326",
         "variants": [{"building": "b001", "variant": "detailed", "lod": "LoD3", "path": "models/b001-detailed.glb"},
                      {"building": "b002", "variant": "detailed", "lod": "LoD3", "path": "models/b002-detailed.glb"}]},
        {"kind": "features", "path": "features.geojson", "observations": "observations.ndjson"},
        {"kind": "roads", "path": "roads.geojson"},
        {"kind": "traffic", "path": "traffic.ndjson"},
        {"kind": "heatmap", "name": "no2", "path": "heatmaps/no2.asc", "colormap": ramp, "opacity": 0.8},
        {"kind": "heatmap", "name": "temperature", "animated": True, "delay_cs": 40, "opacity": 0.7,
         "frames": [f"heatmaps/temperature-{k}.asc" for k in range(4)], "colormap": ramp},
        {"kind": "entity-catalog", "path": "entities.json"},
        {"kind": "entity-instances", "path": "entity_instances.geojson"},
    ]}
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
