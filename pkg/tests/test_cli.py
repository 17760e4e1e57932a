import csv
import json
from pathlib import Path

import pytest

from qmap.cli import main

TOY_ARGS = ["--arch", "eyeriss", "--net", "toy"]


def run_cli(args, capsys):
    main(args)
    return capsys.readouterr().out


def read_csv(path: Path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestEnumerate:
    def test_unknown_layer_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(["enumerate", *TOY_ARGS, "--layer", "nope", "--bits", "8,8,8",
                  "--no-cache", "--out", str(tmp_path)])
        assert info.value.code == 2

    def test_formats_carry_identical_values(self, tmp_path, capsys):
        args = ["enumerate", *TOY_ARGS, "--layer", "fc1", "--bits", "8,8,8;4,4,4",
                "--no-cache", "--out", str(tmp_path)]
        run_cli(args + ["--format", "csv"], capsys)
        csv_rows = read_csv(tmp_path / "enumerate.csv")
        out = run_cli(args + ["--format", "json"], capsys)
        json_rows = json.loads(out)
        for row, record in zip(csv_rows[1:], json_rows):
            assert [str(v) for v in record.values()] == row

    def test_malformed_bits_rejected(self, capsys):
        with pytest.raises(SystemExit):
            main(["enumerate", *TOY_ARGS, "--layer", "fc1", "--bits", "8,8", "--no-cache"])


class TestMap:
    def _map_csv(self, tmp_path, quant, name):
        out = tmp_path / name
        main(["map", *TOY_ARGS, "--quant", quant, "--mapper", "random",
              "--valid-target", "60", "--no-cache", "--out", str(out), "--format", "csv"])
        return (out / "map.csv").read_bytes()

    def test_packing_plateau_byte_identical(self, tmp_path, capsys):
        outputs = {bits: self._map_csv(tmp_path, f"uniform:{bits}", f"u{bits}") for bits in (6, 7, 8)}
        assert outputs[6] == outputs[7] == outputs[8]
        capsys.readouterr()

    def test_single_layer_net(self, tmp_path, capsys):
        net = tmp_path / "one.net"
        net.write_text("name: one\nlayers:\n  - {name: a, kind: standard, c: 2, m: 2, p: 2, q: 2, r: 1, s: 1}\n")
        out = tmp_path / "out"
        main(["map", "--arch", "eyeriss", "--net", str(net), "--quant", "uniform:8",
              "--valid-target", "40", "--no-cache", "--out", str(out), "--format", "csv"])
        rows = read_csv(out / "map.csv")
        assert len(rows) == 3  # header, one layer, TOTAL
        assert rows[1][0] == "a" and rows[2][0] == "TOTAL"
        capsys.readouterr()

    def test_totals_row_sums_layers(self, tmp_path, capsys):
        out = tmp_path / "sum"
        main(["map", *TOY_ARGS, "--quant", "uniform:8", "--valid-target", "60",
              "--no-cache", "--out", str(out), "--format", "csv"])
        rows = read_csv(out / "map.csv")
        header, *data = rows
        total = data[-1]
        for col in range(1, len(header) - 1):  # every numeric column except edp
            body = sum(float(r[col]) for r in data[:-1])
            assert float(total[col]) == pytest.approx(body)
        capsys.readouterr()

    def test_genome_quant_accepted(self, tmp_path, capsys):
        out = tmp_path / "g"
        main(["map", *TOY_ARGS, "--quant", "8,8,6,6,4,4,2,2", "--valid-target", "40",
              "--no-cache", "--out", str(out), "--format", "csv"])
        assert (out / "map.csv").exists()
        capsys.readouterr()


class TestCorrelate:
    def test_two_samples_deterministic(self, tmp_path, capsys):
        args = ["correlate", *TOY_ARGS, "--samples", "2", "--seed", "9",
                "--valid-target", "40", "--no-cache", "--format", "csv"]
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_cli(args + ["--out", str(a)], capsys)
        run_cli(args + ["--out", str(b)], capsys)
        assert (a / "correlate.csv").read_bytes() == (b / "correlate.csv").read_bytes()
        rows = read_csv(a / "correlate.csv")
        assert len(rows) == 4  # header + 2 samples + flagged reference
        assert rows[-1][-1] == "1"

    def test_reference_is_uniform_8(self, tmp_path, capsys):
        out = tmp_path / "r"
        run_cli(["correlate", *TOY_ARGS, "--samples", "2", "--seed", "1",
                 "--valid-target", "40", "--no-cache", "--out", str(out)], capsys)
        rows = read_csv(out / "correlate.csv")
        assert rows[-1][0] == "8,8,8,8,8,8,8,8"


class TestSearch:
    BASE = ["search", *TOY_ARGS, "--population", "9", "--offspring", "4",
            "--generations", "3", "--seed", "2", "--valid-target", "40"]

    def test_surrogate_needs_no_external_process(self, tmp_path, capsys):
        out = tmp_path / "run"
        run_cli(self.BASE + ["--no-cache", "--out", str(out), "--format", "csv"], capsys)
        assert (out / "pareto.csv").exists()
        assert (out / "generations.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["complete"] is True
        assert manifest["command"] == "search"

    def test_rerun_is_bit_identical(self, tmp_path, capsys):
        first = tmp_path / "first"
        again = tmp_path / "again"
        run_cli(self.BASE + ["--no-cache", "--out", str(first), "--format", "csv"], capsys)
        run_cli(["rerun", str(first / "manifest.json"), "--out", str(again)], capsys)
        assert (first / "pareto.csv").read_bytes() == (again / "pareto.csv").read_bytes()
        assert (first / "generations.csv").read_bytes() == (again / "generations.csv").read_bytes()

    def test_cache_on_off_identical(self, tmp_path, capsys):
        cached = tmp_path / "cached"
        plain = tmp_path / "plain"
        run_cli(self.BASE + ["--cache-dir", str(tmp_path / "cache"), "--out", str(cached),
                             "--format", "csv"], capsys)
        run_cli(self.BASE + ["--no-cache", "--out", str(plain), "--format", "csv"], capsys)
        assert (cached / "pareto.csv").read_bytes() == (plain / "pareto.csv").read_bytes()

    def test_external_oracle_command(self, tmp_path, capsys):
        import sys
        double = Path(__file__).parent / "doubles" / "echo_oracle.py"
        out = tmp_path / "ext"
        cmd = f"{sys.executable} {double} --top1 0.5"
        run_cli(self.BASE + ["--no-cache", "--oracle", "external", "--oracle-cmd", cmd,
                             "--out", str(out), "--format", "csv"], capsys)
        rows = read_csv(out / "pareto.csv")
        # constant accuracy: the front collapses to the single cheapest point
        assert len(rows) == 2
        assert float(rows[1][1]) == 0.5


class TestGenomeRange:
    def test_quant_gene_out_of_range_fails(self, capsys):
        with pytest.raises(Exception):
            main(["map", *TOY_ARGS, "--quant", "9,8,8,8,8,8,8,8", "--no-cache"])
