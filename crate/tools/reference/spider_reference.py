#!/usr/bin/env python3
"""Labels SQL with the benchmark's reference evaluator.

Run scripts/fetch-reference-evaluator.sh first; it places the evaluator
sources in tools/reference/vendor/. Requires nltk.

    spider_reference.py hardness TABLES EXAMPLES OUT
    spider_reference.py em TABLES PAIRS OUT

EXAMPLES is a dev.json-style document. PAIRS is JSON lines of
{"db_id", "gold", "pred"}. OUT receives JSON lines in input order.
"""

import json
import os
import sys
from copy import deepcopy

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "vendor"))

import nltk  # noqa: E402
import process_sql  # noqa: E402

# sentence splitting needs the punkt model, which is not needed for one-line SQL
process_sql.word_tokenize = lambda s: nltk.word_tokenize(s, preserve_line=True)

import evaluation  # noqa: E402
from process_sql import Schema, get_sql  # noqa: E402


def load_schemas(tables_path):
    with open(tables_path) as f:
        entries = json.load(f)
    schemas, kmaps = {}, {}
    for entry in entries:
        tables = {}
        for t, name in enumerate(entry["table_names_original"]):
            tables[name.lower()] = [
                c.lower() for owner, c in entry["column_names_original"] if owner == t
            ]
        schemas[entry["db_id"]] = Schema(tables)
        kmaps[entry["db_id"]] = evaluation.build_foreign_key_map(entry)
    return schemas, kmaps


def parse_or_empty(schema, sql):
    try:
        return get_sql(schema, sql), True
    except Exception:
        return deepcopy(evaluation._EMPTY_SQL), False


def hardness(tables_path, examples_path, out_path):
    schemas, _ = load_schemas(tables_path)
    with open(examples_path) as f:
        examples = json.load(f)
    evaluator = evaluation.Evaluator()
    with open(out_path, "w") as out:
        for i, ex in enumerate(examples):
            sql, parsed = parse_or_empty(schemas[ex["db_id"]], ex["query"])
            level = evaluator.eval_hardness(sql)
            out.write(json.dumps({"index": i, "hardness": level, "parsed": parsed}) + "\n")


def exact_match(tables_path, pairs_path, out_path):
    schemas, kmaps = load_schemas(tables_path)
    evaluator = evaluation.Evaluator()
    with open(pairs_path) as f, open(out_path, "w") as out:
        for i, line in enumerate(f):
            pair = json.loads(line)
            schema = schemas[pair["db_id"]]
            kmap = kmaps[pair["db_id"]]
            g_sql, g_ok = parse_or_empty(schema, pair["gold"])
            p_sql, p_ok = parse_or_empty(schema, pair["pred"])
            g_valid = evaluation.build_valid_col_units(g_sql["from"]["table_units"], schema)
            g_sql = evaluation.rebuild_sql_col(g_valid, evaluation.rebuild_sql_val(g_sql), kmap)
            p_valid = evaluation.build_valid_col_units(p_sql["from"]["table_units"], schema)
            p_sql = evaluation.rebuild_sql_col(p_valid, evaluation.rebuild_sql_val(p_sql), kmap)
            em = bool(evaluator.eval_exact_match(p_sql, g_sql))
            out.write(json.dumps({"index": i, "em": em, "gold_parsed": g_ok, "pred_parsed": p_ok}) + "\n")


if __name__ == "__main__":
    if len(sys.argv) != 5 or sys.argv[1] not in ("hardness", "em"):
        sys.exit(__doc__)
    {"hardness": hardness, "em": exact_match}[sys.argv[1]](*sys.argv[2:])
