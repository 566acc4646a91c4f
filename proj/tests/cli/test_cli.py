#!/usr/bin/env python3
"""CLI checks: exit codes, golden stats, and --json output against schemas/."""
import json
import os
import socket
import subprocess
import sys
import tempfile
import unittest

import jsonschema

CLI = sys.argv.pop(1) if len(sys.argv) > 1 else "build/gcinfer"
ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
FIX = os.path.join(ROOT, "fixtures")


def schema(name):
    with open(os.path.join(ROOT, "schemas", name + ".schema.json")) as f:
        return json.load(f)


def run(*args, check=None):
    p = subprocess.run([CLI, *args], capture_output=True, text=True, timeout=600)
    if check is not None and p.returncode != check:
        raise AssertionError(f"{args}: exit {p.returncode}\nstdout: {p.stdout}\nstderr: {p.stderr}")
    return p


def run_json(name, *args):
    p = run("--json", *args, check=0)
    lines = [l for l in p.stdout.splitlines() if l.strip()]
    docs = [json.loads(l) for l in lines]
    for d in docs:
        jsonschema.validate(d, schema(name))
    return docs


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.d = cls.tmp.name
        cls.model = os.path.join(FIX, "desk_64_16_8.json")
        cls.direct = os.path.join(cls.d, "d.netlist")
        cls.outs = os.path.join(cls.d, "o.netlist")
        run_json("compile", "compile", "--model", cls.model, "--mode", "folded", "--out", cls.direct)
        run_json("compile", "compile", "--model", cls.model, "--mode", "folded", "--outsourced", "--out", cls.outs)
        cls.x = os.path.join(cls.d, "x.json")
        with open(cls.x, "w") as f:
            json.dump([((i * 37) % 29 - 14) / 8 for i in range(64)], f)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_version_names_protocol_ids(self):
        p = run("--version", check=0)
        self.assertIn("cipher aes128-fixedkey-halfgates", p.stdout)
        self.assertIn("group ristretto255-blake2b", p.stdout)
        self.assertIn("protocol 1", p.stdout)

    def test_usage_errors_exit_1(self):
        p = run("compile", "--mode", "unrolled")
        self.assertEqual(p.returncode, 1)
        self.assertIn("--model", p.stderr)
        self.assertEqual(run().returncode, 1)
        self.assertEqual(run("--ot-mode", "weak", "selftest").returncode, 1)
        self.assertEqual(run("compile", "--model", self.model, "--mode", "sideways").returncode, 1)
        self.assertEqual(run("prune", "--model", self.model, "--fraction", "0.5", "--retrain-epochs", "3",
                             "--out", os.path.join(self.d, "p.json")).returncode, 1)
        self.assertEqual(run("estimate").returncode, 1)

    def test_validation_errors_exit_3(self):
        bad = os.path.join(self.d, "bad.json")
        with open(bad, "w") as f:
            f.write('{"layers": [{"type": "FullyConnected", "in": 3}]}')
        self.assertEqual(run("compile", "--model", bad).returncode, 3)
        nl = os.path.join(self.d, "bad.netlist")
        with open(nl, "w") as f:
            f.write("not a netlist\n")
        self.assertEqual(run("stats", "--netlist", nl).returncode, 3)

    def test_bench3_stats_match_golden_file(self):
        p = run("compile", "--model", os.path.join(FIX, "bench3.json"), "--mode", "unrolled", "--stats", "-", check=0)
        got = json.loads(p.stdout)
        with open(os.path.join(FIX, "bench3.stats.json")) as f:
            want = json.load(f)
        self.assertEqual(got, want)
        jsonschema.validate(got, schema("compile"))
        self.assertEqual(got["comm_bytes"], got["nonxor_count"] * 32)

    def test_folded_stats_match_golden_file(self):
        (got,) = run_json("stats", "stats", "--netlist", self.direct)
        with open(os.path.join(FIX, "desk_64_16_8.folded.stats.json")) as f:
            want = json.load(f)
        for k in ("xor_count", "nonxor_count", "cycles", "stages", "digest"):
            self.assertEqual(got[k], want[k], k)

    def test_estimate_outputs(self):
        (r,) = run_json("estimate", "estimate", "--published", "benchmark1", "--bw", "823e6")
        self.assertAlmostEqual(r["t_comp"], 1.98, delta=0.02)
        self.assertEqual(r["comm_bytes"], 24700000 * 32)
        (n,) = run_json("estimate", "estimate", "--netlist", self.direct)
        self.assertIsNone(n["t_comm"])
        (a,) = run_json("estimate", "estimate", "--netlist", self.direct, "--analytic", "--model", self.model)
        self.assertEqual(a["source"]["mode"], "folded")
        self.assertLessEqual(abs(a["nonxor_count"] - n["nonxor_count"]), 0.03 * n["nonxor_count"])

    def test_gen_preprocess_prune(self):
        ax, ay = os.path.join(self.d, "a.csv"), os.path.join(self.d, "l.csv")
        run_json("gen-data", "--seed", "5", "gen-data", "--kind", "two-class", "--dim", "16", "--samples", "300",
                 "--out-x", ax, "--out-y", ay)
        m = os.path.join(self.d, "m.json")
        (g,) = run_json("gen-model", "--seed", "6", "gen-model", "--topology", "16,8,2", "--act", "tanh:pl",
                        "--bias", "--scale", "0.5", "--out", m)
        self.assertGreater(g["nonxor_estimate"], 0)
        (p,) = run_json("preprocess", "--seed", "7", "preprocess", "--train", ax, "--labels", ay, "--gamma", "0.3",
                        "--patience", "50", "--batch", "32", "--out", os.path.join(self.d, "proj.json"),
                        "--model", m, "--model-out", os.path.join(self.d, "m2.json"))
        self.assertTrue(p["projector_ok"])
        self.assertGreater(p["trainer_calls"], 0)
        (q,) = run_json("prune", "--seed", "8", "prune", "--model", m, "--fraction", "0.5", "--retrain-epochs", "2",
                        "--train", ax, "--labels", ay, "--out", os.path.join(self.d, "ms.json"))
        self.assertLess(q["nonxor_after"], q["nonxor_before"])
        self.assertEqual(q["masked"], 64 + 8)
        (lr,) = run_json("preprocess", "preprocess", "--train", os.path.join(FIX, "lowrank_A.csv"), "--labels",
                         os.path.join(FIX, "lowrank_L.csv"), "--out", os.path.join(self.d, "lr.json"))
        self.assertLessEqual(lr["l"], 7)
        self.assertLessEqual(lr["epsilon"], 0.3)

    def test_selftest(self):
        (s,) = run_json("selftest", "--seed", "9", "selftest", "--trials", "8")
        self.assertEqual(s["failed"], 0)
        self.assertGreater(s["passed"], 20)

    def _serve(self, name, *args):
        return subprocess.Popen([CLI, "--json", "--ot-mode", "test-dealer", name, *args], stdout=subprocess.PIPE,
                                stderr=subprocess.PIPE, text=True)

    def _collect(self, proc, name):
        out, err = proc.communicate(timeout=300)
        self.assertIn("INSECURE", err)
        docs = [json.loads(l) for l in out.splitlines() if l.strip()]
        for d in docs:
            jsonschema.validate(d, schema(name))
        return proc.returncode, docs

    def test_direct_and_outsourced_sessions_agree(self):
        sp = free_port()
        srv = self._serve("serve", "--model", self.model, "--netlist", self.direct, "--listen", f"127.0.0.1:{sp}",
                          "--sessions", "1")
        p = run("--json", "--ot-mode", "test-dealer", "infer", "--input", self.x, "--netlist", self.direct,
                "--connect", f"127.0.0.1:{sp}", check=0)
        self.assertIn("INSECURE", p.stderr)
        direct = json.loads(p.stdout)
        jsonschema.validate(direct, schema("infer"))
        rc, docs = self._collect(srv, "serve")
        self.assertEqual(rc, 0)
        with open(os.path.join(FIX, "desk_64_16_8.folded.stats.json")) as f:
            golden = json.load(f)
        self.assertEqual(direct["table_bytes"], golden["comm_bytes"])
        self.assertEqual(docs[0]["table_bytes"], golden["comm_bytes"])

        sp, pp = free_port(), free_port()
        srv = self._serve("serve", "--model", self.model, "--netlist", self.outs, "--listen", f"127.0.0.1:{sp}",
                          "--sessions", "1")
        prx = self._serve("proxy", "--netlist", self.outs, "--listen", f"127.0.0.1:{pp}", "--connect",
                          f"127.0.0.1:{sp}", "--sessions", "1")
        p = run("--json", "--seed", "11", "--ot-mode", "test-dealer", "infer", "--input", self.x, "--netlist",
                self.outs, "--connect", f"127.0.0.1:{sp}", "--outsource", "--proxy", f"127.0.0.1:{pp}", check=0)
        outs = json.loads(p.stdout)
        jsonschema.validate(outs, schema("infer"))
        self.assertEqual(outs["label"], direct["label"])
        self.assertEqual(self._collect(srv, "serve")[0], 0)
        self.assertEqual(self._collect(prx, "proxy")[0], 0)

    def test_digest_mismatch_exits_2(self):
        other = os.path.join(self.d, "other.json")
        # the digest covers the architecture, not the weight values
        run("--seed", "99", "gen-model", "--topology", "64,16,8", "--act", "relu", "--out", other, check=0)
        onl = os.path.join(self.d, "other.netlist")
        run("compile", "--model", other, "--mode", "folded", "--out", onl, check=0)
        sp = free_port()
        srv = self._serve("serve", "--model", self.model, "--netlist", self.direct, "--listen", f"127.0.0.1:{sp}",
                          "--sessions", "1")
        try:
            p = run("--ot-mode", "test-dealer", "infer", "--input", self.x, "--netlist", onl, "--connect",
                    f"127.0.0.1:{sp}")
        except BaseException:
            srv.kill()
            raise
        self.assertEqual(p.returncode, 2)
        self.assertIn("DigestMismatch", p.stderr)
        rc, docs = self._collect(srv, "serve")
        self.assertEqual(rc, 2)
        self.assertFalse(docs[0]["ok"])
        # a model that does not match its own netlist is refused before listening
        self.assertEqual(run("serve", "--model", other, "--netlist", self.direct, "--listen", "127.0.0.1:0").returncode, 2)


if __name__ == "__main__":
    unittest.main(verbosity=2)
