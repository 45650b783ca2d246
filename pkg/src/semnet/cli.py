"""Command line interface.

All capabilities are subcommands of one executable. Commands run in-process
against the packaged WordNet files by default; `--server URL` turns every
command into a thin client of a running service instead.

Shared flags are accepted both before the subcommand and after it (the
after-form overrides). Exit codes: 0 success, 1 usage error, 2 data error.
Scalar numbers print with 6 significant digits; structured output files keep
full precision.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import click

from . import dynamics, ingest, measures, wordnet
from . import rg65 as rg
from .errors import SemnetError

WORDNET_ENV = "SEMNET_WORDNET_DIR"


def packaged_wordnet_dir() -> Path:
    return Path(str(resources.files("semnet").joinpath("data/wordnet31")))


def fmt(x) -> str:
    if isinstance(x, float):
        s = format(x, ".6g")
        # keep a decimal marker so floats never print as bare integers
        if s.lstrip("+-").isdigit():
            s += ".0"
        return s
    return str(x)


@dataclass(frozen=True)
class RunConfig:
    wordnet_dir: Path
    ic: str
    sim: str
    capacity: int
    grid: int
    evict: str
    tagger: str | None
    out_dir: Path | None
    server: str | None
    seed: int


class App:
    """Lazy holders for the graph, exception list and HTTP client."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._graph = None
        self._exc = None
        self._client = None

    @property
    def graph(self):
        if self._graph is None:
            d = self.config.wordnet_dir
            self._graph = wordnet.load_noun_database(d / "index.noun", d / "data.noun")
        return self._graph

    @property
    def exc(self):
        if self._exc is None:
            self._exc = wordnet.load_exceptions(self.config.wordnet_dir / "noun.exc")
        return self._exc

    def resolved(self, **overrides) -> RunConfig:
        """Config with non-None subcommand overrides applied and checked."""
        cleaned = {k: v for k, v in overrides.items() if v is not None}
        cfg = replace(self.config, **cleaned)
        try:
            measures.parse_ic_id(cfg.ic)
            measures.parse_sim_id(cfg.sim)
        except ValueError as e:
            raise click.BadParameter(str(e)) from None
        if cfg.capacity < 2:
            raise click.BadParameter("--window must be at least 2")
        if cfg.grid < 2:
            raise click.BadParameter("--grid must be at least 2")
        return cfg

    # ---- thin-client plumbing ----

    @property
    def client(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(base_url=self.config.server, timeout=300.0)
        return self._client

    def _check(self, r):
        if r.status_code >= 400:
            try:
                detail = r.json().get("detail", r.text)
            except ValueError:
                detail = r.text
            raise SemnetError(f"server returned {r.status_code}: {detail}")
        return r.json()

    def _request(self, method: str, path: str, **kw):
        import httpx

        try:
            return self._check(self.client.request(method, path, **kw))
        except httpx.HTTPError as e:
            raise SemnetError(f"cannot reach server {self.config.server}: {e}") from None

    def get(self, path: str, **params):
        return self._request("GET", path, params=params)

    def post(self, path: str, payload):
        return self._request("POST", path, json=payload)

    def delete(self, path: str):
        return self._request("DELETE", path)


def _out_path(cfg: RunConfig, name: str) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir / name


def _validate_ic(ctx, param, value):
    if value is None:
        return None
    try:
        return measures.parse_ic_id(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def _validate_sim(ctx, param, value):
    if value is None:
        return None
    try:
        measures.parse_sim_id(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None
    return value


_ic_opt = click.option("--ic", "ic_", default=None, callback=_validate_ic, help="Information content formula.")
_sim_opt = click.option("--sim", "sim_", default=None, callback=_validate_sim, help="Similarity formula.")
_window_opt = click.option("--window", "capacity_", type=int, default=None, help="Window capacity (distinct nouns).")
_grid_opt = click.option("--grid", "grid_", type=int, default=None, help="Resampling grid size.")
_evict_opt = click.option("--evict", "evict_", type=click.Choice(dynamics.EVICTION_POLICIES), default=None)
_tagger_opt = click.option("--tagger", "tagger_", default=None, help="External POS tagger command.")
_out_opt = click.option("--out", "out_", type=click.Path(file_okay=False, path_type=Path), default=None, help="Directory for structured output files.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--wordnet",
    "wordnet_dir",
    envvar=WORDNET_ENV,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help=f"WordNet noun database directory (default: packaged copy; env {WORDNET_ENV}).",
)
@click.option("--ic", default=measures.DEFAULT_IC, show_default=True, help="Information content formula.")
@click.option("--sim", default=measures.DEFAULT_SIM, show_default=True, help="Similarity formula.")
@click.option("--window", "capacity", default=dynamics.DEFAULT_CAPACITY, show_default=True, help="Window capacity (distinct nouns).")
@click.option("--grid", default=dynamics.DEFAULT_GRID, show_default=True, help="Resampling grid size.")
@click.option("--evict", type=click.Choice(dynamics.EVICTION_POLICIES), default="fifo", show_default=True)
@click.option("--tagger", default=None, help="External POS tagger command (token<TAB>tag lines on stdout).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Directory for structured output files.")
@click.option("--server", default=None, help="Base URL of a running service; commands become thin clients.")
@click.option("--seed", default=0, show_default=True, help="Seed for synthetic generation.")
@click.pass_context
def cli(ctx, wordnet_dir, ic, sim, capacity, grid, evict, tagger, out_dir, server, seed):
    """Lexical-graph semantic measures and conversation dynamics."""
    ctx.obj = App(
        RunConfig(
            wordnet_dir=wordnet_dir or packaged_wordnet_dir(),
            ic=ic,
            sim=sim,
            capacity=capacity,
            grid=grid,
            evict=evict,
            tagger=tagger,
            out_dir=out_dir,
            server=server,
            seed=seed,
        )
    )


@cli.command()
@click.pass_obj
def stats(app: App):
    """Graph size, depth and commonness statistics."""
    if app.config.server:
        data = app.get("/stats")
        for key in (
            "meaningCount",
            "wordCount",
            "hyperEdgeCount",
            "senseEdgeCount",
            "maxWordDepth",
            "maxMeaningDepth",
            "maxLeaves",
            "minCommonness",
            "maxCommonness",
        ):
            click.echo(f"{key}: {fmt(data[key])}")
        return
    s = wordnet.graph_stats(app.graph)
    click.echo(f"meaningCount: {s.meaning_count}")
    click.echo(f"wordCount: {s.word_count}")
    click.echo(f"hyperEdgeCount: {s.hyper_edge_count}")
    click.echo(f"senseEdgeCount: {s.sense_edge_count}")
    click.echo(f"maxWordDepth: {s.max_word_depth}")
    click.echo(f"maxMeaningDepth: {s.max_meaning_depth}")
    click.echo(f"maxLeaves: {s.max_leaves}")
    click.echo(f"minCommonness: {fmt(s.min_commonness)}")
    click.echo(f"maxCommonness: {fmt(s.max_commonness)}")


@cli.command()
@click.argument("word")
@_ic_opt
@click.pass_obj
def ic(app: App, word: str, ic_):
    """Information content of WORD under --ic."""
    cfg = app.resolved(ic=ic_)
    if cfg.server:
        click.echo(fmt(float(app.get("/ic", word=word, formula=cfg.ic)["value"])))
        return
    click.echo(fmt(measures.information_content(app.graph, word, cfg.ic)))


@cli.command()
@click.argument("w1")
@click.argument("w2")
@_sim_opt
@click.pass_obj
def sim(app: App, w1: str, w2: str, sim_):
    """Similarity of W1 and W2 under --sim."""
    cfg = app.resolved(sim=sim_)
    if cfg.server:
        click.echo(fmt(float(app.get("/sim", w1=w1, w2=w2, formula=cfg.sim)["value"])))
        return
    click.echo(fmt(measures.similarity(app.graph, w1, w2, measures.parse_sim_id(cfg.sim))))


@cli.command()
@click.argument("w1")
@click.argument("w2")
@click.pass_obj
def lcs(app: App, w1: str, w2: str):
    """Lowest common subsumer meaning id of W1 and W2."""
    if app.config.server:
        click.echo(app.get("/lcs", w1=w1, w2=w2)["lcs"])
        return
    from . import graph as gc

    click.echo(gc.lcs(app.graph, w1, w2))


@cli.command()
@click.argument("w1")
@click.argument("w2")
@click.pass_obj
def dist(app: App, w1: str, w2: str):
    """Word distance between W1 and W2."""
    if app.config.server:
        click.echo(app.get("/dist", w1=w1, w2=w2)["distance"])
        return
    from . import graph as gc

    click.echo(gc.word_distance(app.graph, w1, w2))


def _print_rg65_summary(rows, group_means, sb_mean, excluded, split_sizes):
    for row in rows:
        click.echo(f"{row['measure']}\tr={fmt(row['pearsonR'])}\tp={fmt(row['pValue'])}")
    click.echo(
        f"group mean r: path={fmt(group_means['path'])} "
        f"subsumer={fmt(group_means['subsumer'])} ic={fmt(group_means['ic'])}"
    )
    click.echo(f"sanchez-batet family mean r: {fmt(sb_mean)}")
    click.echo(f"excluded pairs: {excluded}")
    click.echo(f"top-level split sizes: {split_sizes[0]} / {split_sizes[1]}")


@cli.command()
@click.argument("file", required=False, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--linkage", type=click.Choice(["average", "complete"]), default="average", show_default=True)
@_out_opt
@click.pass_obj
def rg65(app: App, file: Path | None, linkage: str, out_):
    """Correlate all 46 measures against RG-65 ratings and cluster them."""
    cfg = app.resolved(out_dir=out_)
    if cfg.server:
        pairs = None
        if file is not None:
            pairs = [[p.w1, p.w2, p.human_rating] for p in rg.load_rg65(file)]
        data = app.post("/rg65", {"pairs": pairs, "linkage": linkage})
        _print_rg65_summary(
            data["rows"],
            data["groupMeans"],
            data["sanchezBatetFamilyMeanR"],
            data["excludedPairs"],
            sorted([len(data["topSplit"][0]), len(data["topSplit"][1])]),
        )
        return
    path = file or rg.packaged_rg65_path()
    pairs = rg.load_rg65(path)
    table = rg.evaluate_all(app.graph, pairs)
    order, mat = rg.correlation_distance_matrix(table.scores)
    dgm = rg.hierarchical_cluster(mat, order, linkage)
    left, right = rg.top_split(dgm)
    rows = [
        {"measure": r.measure_id, "pearsonR": r.pearson_r, "pValue": r.p_value}
        for r in table.rows
    ]
    _print_rg65_summary(
        rows,
        rg.group_mean_r(table),
        rg.ic_family_mean_r(table, "sanchez-batet"),
        table.excluded_pairs,
        sorted([len(left), len(right)]),
    )
    if cfg.out_dir:
        rg.write_correlation_csv(table, _out_path(cfg, "correlations.csv"))
        rg.write_correlation_jsonl(table, _out_path(cfg, "correlations.jsonl"))
        rg.write_dendrogram_json(dgm, _out_path(cfg, "dendrogram.json"))
        rg.write_matrix_csv(order, mat, _out_path(cfg, "distance_matrix.csv"))


def _segments_for_transfer(cfg: RunConfig, path: Path) -> list[dict]:
    """Client-side view of segments; raw text is tagged locally so the
    server only ever normalizes noun tokens."""
    out = []
    for seg in ingest.load_segments(path):
        if seg.nouns is not None:
            nouns = list(seg.nouns)
        else:
            if not cfg.tagger:
                raise SemnetError("segments carry raw text; configure --tagger")
            nouns = []
            for chunk in seg.text:
                nouns.extend(
                    tok
                    for tok, tag in ingest.run_tagger(cfg.tagger, chunk)
                    if tag.startswith(ingest.NOUN_TAG_PREFIX)
                )
        out.append(
            {
                "ideaId": seg.idea_id,
                "studentId": seg.student_id,
                "success": seg.success,
                "nouns": nouns,
            }
        )
    return out


def _write_trajectory_csv(path: Path, points) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "meanIc", "meanSim", "changed"])
        for p in points:
            out.writerow([repr(p[0]), repr(p[1]), repr(p[2]), int(p[3])])


def _write_curve_csv(path: Path, points) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "meanIc", "meanSim"])
        for t, ic_val, sim_val in points:
            out.writerow([repr(t), repr(ic_val), repr(sim_val)])


@cli.command()
@click.argument("ideas", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--join-bigrams", is_flag=True, default=False, help="Try underscore-joined bigrams against the lexicon.")
@_ic_opt
@_sim_opt
@_window_opt
@_evict_opt
@_tagger_opt
@_out_opt
@click.pass_obj
def analyze(app: App, ideas: Path, join_bigrams: bool, ic_, sim_, capacity_, evict_, tagger_, out_):
    """Trajectories and trendlines for every idea in the IDEAS file."""
    cfg = app.resolved(ic=ic_, sim=sim_, capacity=capacity_, evict=evict_, tagger=tagger_, out_dir=out_)
    if cfg.server:
        data = app.post(
            "/analyze",
            {
                "segments": _segments_for_transfer(cfg, ideas),
                "ic": cfg.ic,
                "sim": cfg.sim,
                "capacity": cfg.capacity,
                "evict": cfg.evict,
            },
        )
        results = data["ideas"]
        for r in results:
            click.echo(
                f"{r['ideaId']}\t{r['studentId']}\tsuccess={r['success']}\t"
                f"ic_slope={fmt(float(r['icTrend']['slope']))}\t"
                f"sim_slope={fmt(float(r['simTrend']['slope']))}\t{r['classification']}"
            )
        if cfg.out_dir:
            with open(_out_path(cfg, "trendlines.jsonl"), "w", encoding="utf-8") as fh:
                for r in results:
                    fh.write(json.dumps({k: v for k, v in r.items() if k != "points"}, sort_keys=True) + "\n")
            for r in results:
                _write_trajectory_csv(_out_path(cfg, f"trajectory_{r['ideaId']}.csv"), r["points"])
        return

    segments = ingest.load_segments(ideas)
    records = ingest.to_idea_records(segments, app.graph, app.exc, cfg.tagger, join_bigrams)
    mcfg = measures.MeasureConfig(cfg.ic, measures.parse_sim_id(cfg.sim))
    results = []
    for rec in records:
        traj = dynamics.trajectory(app.graph, rec.nouns, mcfg, cfg.capacity, cfg.evict)
        ic_trend = dynamics.linear_fit((p.t, p.mean_ic) for p in traj.points)
        sim_trend = dynamics.linear_fit((p.t, p.mean_sim) for p in traj.points)
        label = dynamics.classify(sim_trend)
        results.append((rec, traj, ic_trend, sim_trend, label))
        click.echo(
            f"{rec.idea_id}\t{rec.student_id}\tsuccess={rec.success}\t"
            f"ic_slope={fmt(ic_trend.slope)}\tsim_slope={fmt(sim_trend.slope)}\t{label}"
        )
    if cfg.out_dir:
        with open(_out_path(cfg, "trendlines.jsonl"), "w", encoding="utf-8") as fh:
            for rec, traj, ic_trend, sim_trend, label in results:
                fh.write(
                    json.dumps(
                        {
                            "ideaId": rec.idea_id,
                            "studentId": rec.student_id,
                            "success": rec.success,
                            "icTrend": dynamics.trend_to_dict(ic_trend),
                            "simTrend": dynamics.trend_to_dict(sim_trend),
                            "classification": label,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        for rec, traj, *_ in results:
            _write_trajectory_csv(
                _out_path(cfg, f"trajectory_{rec.idea_id}.csv"),
                [(p.t, p.mean_ic, p.mean_sim, p.changed) for p in traj.points],
            )


@cli.command()
@click.argument("ideas", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--join-bigrams", is_flag=True, default=False, help="Try underscore-joined bigrams against the lexicon.")
@_ic_opt
@_sim_opt
@_window_opt
@_grid_opt
@_evict_opt
@_tagger_opt
@_out_opt
@click.pass_obj
def backtest(app: App, ideas: Path, join_bigrams: bool, ic_, sim_, capacity_, grid_, evict_, tagger_, out_):
    """Full divergence/convergence report over a labeled idea corpus."""
    cfg = app.resolved(
        ic=ic_, sim=sim_, capacity=capacity_, grid=grid_, evict=evict_, tagger=tagger_, out_dir=out_
    )
    if cfg.server:
        data = app.post(
            "/backtest",
            {
                "segments": _segments_for_transfer(cfg, ideas),
                "ic": cfg.ic,
                "sim": cfg.sim,
                "capacity": cfg.capacity,
                "grid": cfg.grid,
                "evict": cfg.evict,
            },
        )
    else:
        segments = ingest.load_segments(ideas)
        records = ingest.to_idea_records(segments, app.graph, app.exc, cfg.tagger, join_bigrams)
        mcfg = measures.MeasureConfig(cfg.ic, measures.parse_sim_id(cfg.sim))
        report = dynamics.backtest(app.graph, records, mcfg, cfg.capacity, cfg.grid, cfg.evict)
        data = dynamics.report_to_dict(report)
    _print_backtest(data)
    if cfg.out_dir:
        _write_backtest_files(cfg, data)


def _print_backtest(data: dict) -> None:
    n_s = sum(1 for r in data["ideas"] if r["success"])
    n_u = len(data["ideas"]) - n_s
    click.echo(f"ideas: {len(data['ideas'])} ({n_s} successful / {n_u} unsuccessful)")
    click.echo(
        f"ic slopes: successful={fmt(float(data['kSuccessfulIc']))} "
        f"unsuccessful={fmt(float(data['kUnsuccessfulIc']))}"
    )
    click.echo(
        f"sim slopes: successful={fmt(float(data['kSuccessfulSim']))} "
        f"unsuccessful={fmt(float(data['kUnsuccessfulSim']))}"
    )
    for name, test in (("ic", data["icTest"]), ("sim", data["simTest"])):
        if test["degenerate"]:
            click.echo(f"{name} test ({test['alternative']}): degenerate (zero-variance differences)")
        else:
            click.echo(
                f"{name} test ({test['alternative']}): t={fmt(float(test['t']))} "
                f"p={fmt(float(test['p']))} df={test['df']}"
            )
    counts = {}
    for r in data["ideas"]:
        counts[r["classification"]] = counts.get(r["classification"], 0) + 1
    click.echo("classifications: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if data["excludedStudents"]:
        click.echo("excluded students: " + ", ".join(data["excludedStudents"]))
    click.echo(f"policy: {data['evictionPolicy']}, pairing: {data['pairing']}")


def _write_backtest_files(cfg: RunConfig, data: dict) -> None:
    with open(_out_path(cfg, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_curve_csv(_out_path(cfg, "group_successful.csv"), data["avgSuccessful"])
    _write_curve_csv(_out_path(cfg, "group_unsuccessful.csv"), data["avgUnsuccessful"])


@cli.command()
@_ic_opt
@_sim_opt
@_window_opt
@_evict_opt
@click.pass_obj
def watch(app: App, ic_, sim_, capacity_, evict_):
    """Read noun tokens from stdin; emit one JSON record per event.

    Time cannot be normalized on an open stream, so records carry the event
    index and a running least-squares slope over all points so far.
    """
    cfg = app.resolved(ic=ic_, sim=sim_, capacity=capacity_, evict=evict_)
    if cfg.server:
        session = app.post(
            "/watch",
            {"capacity": cfg.capacity, "ic": cfg.ic, "sim": cfg.sim, "evict": cfg.evict},
        )["sessionId"]
        try:
            for line in sys.stdin:
                tok = line.strip()
                if not tok:
                    continue
                click.echo(json.dumps(app.post(f"/watch/{session}", {"token": tok}), sort_keys=True))
        finally:
            app.delete(f"/watch/{session}")
        return

    graph, exc = app.graph, app.exc
    mcfg = measures.MeasureConfig(cfg.ic, measures.parse_sim_id(cfg.sim))
    state = WatchState(cfg.capacity, cfg.evict)
    for line in sys.stdin:
        tok = line.strip()
        if not tok:
            continue
        record = state.step(graph, exc, mcfg, tok)
        click.echo(json.dumps(record, sort_keys=True))


class WatchState:
    """Incremental window over an open stream; one record per token."""

    def __init__(self, capacity: int, policy: str):
        self.capacity = capacity
        self.policy = policy
        self.members: list[str] = []
        self.seq = 0
        self.points: list[tuple[int, float, float]] = []
        self.cur_ic: float | None = None
        self.cur_sim: float | None = None

    def step(self, graph, exc, mcfg: measures.MeasureConfig, tok: str) -> dict:
        w = ingest.normalize_noun(tok, graph, exc)
        if w is None:
            return {"dropped": tok, "reason": "not in lexicon"}
        if w in self.members:
            if self.policy == "lru":
                self.members.remove(w)
                self.members.append(w)
            changed = False
        else:
            self.members.append(w)
            if len(self.members) > self.capacity:
                self.members.pop(0)
            changed = True
        seq = self.seq
        self.seq += 1
        if len(self.members) < self.capacity:
            return {"seq": seq, "noun": w, "window": list(self.members), "filling": True}
        if changed or self.cur_ic is None:
            self.cur_ic = measures.mean_ic(graph, self.members, mcfg.ic)
            self.cur_sim = measures.mean_pairwise_similarity(
                graph, self.members, mcfg.sim, skip_degenerate=True
            )
        self.points.append((seq, self.cur_ic, self.cur_sim))
        record = {
            "seq": seq,
            "noun": w,
            "window": list(self.members),
            "changed": changed,
            "meanIc": self.cur_ic,
            "meanSim": self.cur_sim,
            "icSlope": None,
            "simSlope": None,
            "classification": None,
        }
        if len(self.points) >= 2:
            ic_trend = dynamics.linear_fit((s, v) for s, v, _ in self.points)
            sim_trend = dynamics.linear_fit((s, v) for s, _, v in self.points)
            record["icSlope"] = ic_trend.slope
            record["simSlope"] = sim_trend.slope
            record["classification"] = dynamics.classify(sim_trend)
        return record


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.pass_obj
def serve(app: App, host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(app.config.wordnet_dir), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="semnet")
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except SemnetError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except BrokenPipeError:
        return 0
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
