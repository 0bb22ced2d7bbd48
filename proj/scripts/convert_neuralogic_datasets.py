#!/usr/bin/env python3
"""Convert the Trains and Mutagenesis (188) example sets shipped with the
PyNeuraLogic wheel (MIT licensed) into the CSV + JSON descriptor layout read
by `nrelaggs`.

Usage: convert_neuralogic_datasets.py <neuralogic wheel or extracted dir> <out data dir>
"""
import csv
import json
import os
import re
import sys
import zipfile

PREFIX = "neuralogic/utils/data/datasets/"
LITERAL = re.compile(r"(\w+)\(([^)]*)\)")


def open_source(path):
    if os.path.isdir(path):
        return lambda rel: open(os.path.join(path, PREFIX, rel), encoding="utf-8").read()
    archive = zipfile.ZipFile(path)
    return lambda rel: archive.read(PREFIX + rel).decode("utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_schema(path, descriptor):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(descriptor, fh, indent=2)
        fh.write("\n")


def convert_trains(read, out):
    facts = LITERAL.findall(read("simple/trains/examples.txt"))
    queries = read("simple/trains/queries.txt").split("\n")
    cars = {}
    for pred, args in facts:
        train, car, value = [a.strip() for a in args.split(",")]
        cars.setdefault((int(train), int(car)), {})[pred] = value
    os.makedirs(out, exist_ok=True)
    trains = []
    for line in queries:
        line = line.strip()
        if not line:
            continue
        weight, lit = line.split(" ", 1)
        train = int(re.search(r"\((\d+)\)", lit).group(1))
        trains.append((train, "east" if float(weight) > 0 else "west"))
    write_csv(os.path.join(out, "trains.csv"), ["id", "direction"], [[t, d] for t, d in trains])
    rows = []
    for (train, pos) in sorted(cars):
        c = cars[(train, pos)]
        rows.append([f"t{train}_c{pos}", train, pos, c["shape"], c["length"], c["sides"],
                     c["roof"], c["wheels"], c["loadshape"], c["loadnum"]])
    write_csv(os.path.join(out, "cars.csv"),
              ["car_id", "train_id", "position", "shape", "len", "sides", "roof", "wheels",
               "load_shape", "load_num"], rows)
    write_schema(os.path.join(out, "schema.json"), {
        "tables": [
            {"name": "cars", "file": "cars.csv", "columns": [
                {"name": "car_id", "kind": "key"},
                {"name": "train_id", "kind": "foreign_key", "references": "trains"},
                {"name": "position", "kind": "numeric"},
                {"name": "shape", "kind": "categorical"},
                {"name": "len", "kind": "categorical"},
                {"name": "sides", "kind": "categorical"},
                {"name": "roof", "kind": "categorical"},
                {"name": "wheels", "kind": "numeric"},
                {"name": "load_shape", "kind": "categorical"},
                {"name": "load_num", "kind": "numeric"}]},
            {"name": "trains", "file": "trains.csv", "columns": [
                {"name": "id", "kind": "key"},
                {"name": "direction", "kind": "categorical"}]},
        ],
        "target_table": "trains",
        "target_attribute": "direction",
    })


def convert_mutagenesis(read, out):
    examples = read("molecules/mutagenesis/examples.txt").split("\n")
    queries = read("molecules/mutagenesis/queries.txt").split("\n")
    examples = [e for e in examples if e.strip()]
    queries = [q for q in queries if q.strip()]
    assert len(examples) == len(queries)
    drugs, atoms, bonds = [], [], []
    for example, query in zip(examples, queries):
        label = "1" if float(query.split()[0]) > 0 else "0"
        element, bond_type, edges = {}, {}, []
        for pred, args in LITERAL.findall(example):
            args = [a.strip() for a in args.split(",")]
            if pred == "bond":
                edges.append(tuple(args))
            elif pred.startswith("b_"):
                bond_type[args[0]] = pred[2:]
            else:
                element[args[0]] = pred
        drug = next(iter(element)).split("_")[0]
        drugs.append([drug, label])
        for atom in sorted(element, key=lambda a: int(a.split("_")[1])):
            atoms.append([atom, drug, element[atom]])
        # Each undirected bond is listed once per endpoint.
        for a1, a2, bid in sorted(set(edges), key=lambda e: (int(e[0].split("_")[1]), int(e[2]), e[1])):
            bonds.append([f"{drug}_b{bid}_{a1.split('_')[1]}", a1, bond_type[bid], element[a2]])
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "drugs.csv"), ["drug_id", "active"], drugs)
    write_csv(os.path.join(out, "atoms.csv"), ["atom_id", "drug_id", "element"], atoms)
    write_csv(os.path.join(out, "bonds.csv"), ["bond_id", "atom_id", "bond_type", "partner_element"], bonds)
    write_schema(os.path.join(out, "schema.json"), {
        "tables": [
            {"name": "atoms", "file": "atoms.csv", "columns": [
                {"name": "atom_id", "kind": "key"},
                {"name": "drug_id", "kind": "foreign_key", "references": "drugs"},
                {"name": "element", "kind": "categorical"}]},
            {"name": "bonds", "file": "bonds.csv", "columns": [
                {"name": "bond_id", "kind": "key"},
                {"name": "atom_id", "kind": "foreign_key", "references": "atoms"},
                {"name": "bond_type", "kind": "categorical"},
                {"name": "partner_element", "kind": "categorical"}]},
            {"name": "drugs", "file": "drugs.csv", "columns": [
                {"name": "drug_id", "kind": "key"},
                {"name": "active", "kind": "categorical"}]},
        ],
        "target_table": "drugs",
        "target_attribute": "active",
    })


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    read = open_source(sys.argv[1])
    convert_trains(read, os.path.join(sys.argv[2], "trains"))
    convert_mutagenesis(read, os.path.join(sys.argv[2], "mutagenesis188"))


if __name__ == "__main__":
    main()
