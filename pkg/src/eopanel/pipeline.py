"""Stage orchestration: synth|ingest -> extract -> metrics -> battery -> analyze.

Each stage is cached on a key built from its config section and the content
hashes of its inputs; re-runs with unchanged keys are no-ops. A manifest
records every output file with its hash plus the thresholds in force.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .battery import (
    BatteryConfig, blind, load_blindmap, load_results_jsonl, run_battery,
    save_blindmap, save_results_jsonl, unblind_records, config_hash,
)
from .errors import ConfigurationError, DependencyError
from .grid import (
    extract_site, load_coordinates, load_grid, normalize_units,
    save_coordinates, save_grid,
)
from .heuristics import (
    bumpline, descriptives, results_frame, save_document,
    significance_shares, spec_chart,
)
from .metrics import (
    ALL_METRICS, CLIMATOLOGY_BASE, CLIMATOLOGY_BASES, MetricConfig,
    RAINFALL_METRICS, TEMPERATURE_METRICS, build_climatology, rainfall_base,
    temperature_base,
)
from .errors import ClimatologyError, MetricError
from .seasons import (
    SeasonSlice, builtin_calendar, load_calendar_file, load_wave_map,
    resolve_region, season_dates, slice_seasons,
)
from .synth import SynthConfig, gen_households, gen_panel, gen_weather, save_truth

STAGES = ("synth", "ingest", "extract", "metrics", "battery", "analyze")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_json(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


class Manifest:
    def __init__(self, path: Path):
        self.path = path
        if path.exists():
            with open(path) as fh:
                self.data = json.load(fh)
        else:
            self.data = {"tool_version": __version__, "stages": {}, "settings": {}}

    def stage_fresh(self, stage: str, key: str, out_dir: Path) -> bool:
        entry = self.data["stages"].get(stage)
        if not entry or entry.get("key") != key:
            return False
        for rel, digest in entry.get("outputs", {}).items():
            p = out_dir / rel
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def record(self, stage: str, key: str, outputs: list[Path], out_dir: Path) -> None:
        self.data["stages"][stage] = {
            "key": key,
            "outputs": {
                str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(outputs)
            },
            "completed_at": dt.datetime.now(dt.timezone.utc).isoformat(),
        }

    def save(self) -> None:
        self.data["tool_version"] = __version__
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


class Pipeline:
    def __init__(self, config: dict, out_dir, workers: int = 1,
                 seed: int | None = None, force: bool = False,
                 blind_products: bool = False):
        self.config = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.workers = max(1, workers)
        self.force = force
        self.blind_products = blind_products
        self.seed = seed
        self.manifest = Manifest(self.out / "manifest.json")
        self.metric_config = MetricConfig(**config.get("metrics", {}))
        self.manifest.data["settings"] = {
            "metric_config": self.metric_config.to_dict(),
            "seed": seed,
        }

    # -- shared lookups -----------------------------------------------------

    def synth_config(self) -> SynthConfig | None:
        if "synth" not in self.config:
            return None
        sc = SynthConfig.from_dict(self.config["synth"])
        if self.seed is not None:
            sc.seed = self.seed
        return sc

    def grid_entries(self) -> list[tuple[str, str, str, Path]]:
        """(country, product, variable, path prefix) for every stored grid."""
        sc = self.synth_config()
        entries = []
        if sc is not None:
            base = self.out / "synth"
            for country in sc.country_ids():
                for p in sc.products:
                    variables = ["precip"] if p.variable == "precip" else ["temp_mean", "temp_max"]
                    for var in variables:
                        entries.append((
                            country, p.product_id, var,
                            base / f"{country}__{p.product_id}__{var}",
                        ))
        else:
            for g in self.config.get("ingest", {}).get("grids", []):
                prefix = self.out / "ingest" / Path(g["path_prefix"]).name
                hdr = Path(str(prefix) + ".hdr.json")
                if hdr.exists():
                    with open(hdr) as fh:
                        h = json.load(fh)
                    entries.append((g["country"], h["product_id"], h["variable"], prefix))
                else:
                    entries.append((g["country"], g.get("product_id", "?"), g.get("variable", "?"), prefix))
        return entries

    def coords_path(self) -> Path:
        if self.synth_config() is not None:
            return self.out / "synth" / "coords.csv"
        return Path(self.config["ingest"]["coordinates"])

    def panel_path(self) -> Path:
        if self.synth_config() is not None:
            return self.out / "synth" / "panel.csv"
        return Path(self.config["ingest"]["panel"])

    def windows(self) -> dict:
        sc = self.synth_config()
        out = {}
        if sc is not None:
            for c in sc.country_ids():
                out[c] = sc.season_window(c)
        cal = self.config.get("calendar")
        if cal:
            if isinstance(cal, str):
                out.update(load_calendar_file(cal))
            else:
                from .seasons import Region, SeasonWindow
                for rec in cal:
                    regions = tuple(Region(tuple(r["start"]), tuple(r["end"])) for r in rec["regions"])
                    out[rec["country_id"]] = SeasonWindow(
                        rec["country_id"], rec["modality"], regions, rec.get("boundary_lat"))
        if not out:
            for c in self.battery_config().countries:
                boundary = self.config.get("boundaries", {}).get(c)
                out[c] = builtin_calendar(c, boundary)
        return out

    def wave_map(self):
        path = self.config.get("ingest", {}).get("wave_map")
        return load_wave_map(path) if path else None

    def battery_config(self) -> BatteryConfig:
        if "battery" in self.config:
            bc = BatteryConfig.from_dict(self.config["battery"])
        else:
            sc = self.synth_config()
            if sc is None:
                raise ConfigurationError("config has neither 'battery' nor 'synth'")
            bc = BatteryConfig(
                countries=sc.country_ids(),
                rain_products=sc.rain_products(),
                temp_products=sc.temp_products(),
            )
        if self.blind_products and bc.blind_seed is None:
            bc.blind_seed = self.seed if self.seed is not None else 0
        return bc

    # -- stages -------------------------------------------------------------

    def run(self, stage: str) -> None:
        if stage == "all":
            order = ["synth" if "synth" in self.config else "ingest",
                     "extract", "metrics", "battery", "analyze"]
            for s in order:
                self.run(s)
            return
        if stage not in STAGES:
            raise ConfigurationError(f"unknown stage {stage!r}")
        getattr(self, f"stage_{stage}")()
        self.manifest.save()

    def stage_synth(self) -> None:
        sc = self.synth_config()
        if sc is None:
            raise ConfigurationError("no 'synth' section in config")
        key = sha256_json({"synth": self.config.get("synth", {}), "seed": sc.seed})
        out_dir = self.out / "synth"
        if not self.force and self.manifest.stage_fresh("synth", key, self.out):
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        grids = gen_weather(sc)
        outputs = []
        for (country, product, variable), ds in sorted(grids.items()):
            prefix = out_dir / f"{country}__{product}__{variable}"
            save_grid(ds, prefix)
            outputs += [Path(str(prefix) + ".hdr.json"), Path(str(prefix) + ".f32")]
        households = gen_households(sc)
        coords = {hid: coord for hid, (c, coord) in households.items()}
        save_coordinates(coords, out_dir / "coords.csv")
        panel = gen_panel(sc, grids, households)
        panel.to_csv(out_dir / "panel.csv", index=False)
        save_truth(sc, out_dir / "truth.json")
        outputs += [out_dir / "coords.csv", out_dir / "panel.csv", out_dir / "truth.json"]
        self.manifest.record("synth", key, outputs, self.out)

    def stage_ingest(self) -> None:
        ingest_cfg = self.config.get("ingest")
        if not ingest_cfg:
            raise ConfigurationError("no 'ingest' section in config")
        out_dir = self.out / "ingest"
        sources = []
        for g in ingest_cfg.get("grids", []):
            for ext in (".hdr.json", ".f32"):
                p = Path(g["path_prefix"] + ext)
                if not p.exists():
                    raise DependencyError(f"ingest input missing: {p}")
                sources.append(p)
        key = sha256_json({
            "ingest": ingest_cfg,
            "hashes": [sha256_file(p) for p in sources],
        })
        if not self.force and self.manifest.stage_fresh("ingest", key, self.out):
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = []
        for g in ingest_cfg.get("grids", []):
            ds = normalize_units(load_grid(g["path_prefix"]))
            prefix = out_dir / Path(g["path_prefix"]).name
            save_grid(ds, prefix)
            outputs += [Path(str(prefix) + ".hdr.json"), Path(str(prefix) + ".f32")]
        self.manifest.record("ingest", key, outputs, self.out)

    def _require(self, path: Path, stage: str) -> Path:
        if not path.exists():
            raise DependencyError(f"missing {path}; run stage '{stage}' first")
        return path

    def stage_extract(self) -> None:
        entries = self.grid_entries()
        coords_path = self._require(self.coords_path(),
                                    "synth" if "synth" in self.config else "ingest")
        for _, _, _, prefix in entries:
            self._require(Path(str(prefix) + ".hdr.json"),
                          "synth" if "synth" in self.config else "ingest")
        key = sha256_json({
            "grids": [sha256_file(Path(str(p) + ".f32")) for _, _, _, p in entries],
            "coords": sha256_file(coords_path),
        })
        out_dir = self.out / "extract"
        if not self.force and self.manifest.stage_fresh("extract", key, self.out):
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        coords = load_coordinates(coords_path)
        country_of = self._household_countries(coords)
        outputs = []
        for country, product, variable, prefix in entries:
            ds = normalize_units(load_grid(prefix))
            hids = sorted(h for h, c in country_of.items() if c == country)
            series = np.empty((len(hids), ds.n_days), dtype=np.float32)
            for i, hid in enumerate(hids):
                s = extract_site(ds, coords[hid], household_id=hid)
                series[i] = s.values
            path = out_dir / f"{country}__{product}__{variable}.npz"
            np.savez_compressed(
                path,
                household_ids=np.array(hids),
                start_date=np.array(ds.start_date.isoformat()),
                values=series,
            )
            outputs.append(path)
        self.manifest.record("extract", key, outputs, self.out)

    def _household_countries(self, coords) -> dict[str, str]:
        """Map households to countries: panel wins, synth ids as fallback."""
        panel_path = self.panel_path()
        if panel_path.exists():
            df = pd.read_csv(panel_path, dtype={"household_id": str, "country_id": str})
            mapping = dict(zip(df["household_id"], df["country_id"]))
            if set(coords) - set(mapping):
                # households surveyed in no wave still get extracted by prefix
                for hid in coords:
                    mapping.setdefault(hid, hid.split("-")[0])
            return mapping
        return {hid: hid.split("-")[0] for hid in coords}

    def stage_metrics(self) -> None:
        entries = self.grid_entries()
        ex_dir = self.out / "extract"
        npz_paths = {}
        for country, product, variable, _ in entries:
            p = ex_dir / f"{country}__{product}__{variable}.npz"
            self._require(p, "extract")
            npz_paths[(country, product, variable)] = p
        key = sha256_json({
            "extract": {str(k): sha256_file(p) for k, p in sorted(npz_paths.items())},
            "metric_config": self.metric_config.to_dict(),
        })
        out_dir = self.out / "metrics"
        if not self.force and self.manifest.stage_fresh("metrics", key, self.out):
            return
        out_dir.mkdir(parents=True, exist_ok=True)

        windows = self.windows()
        coords = load_coordinates(self.coords_path())
        wide_rows, skipped = [], []
        pairs = sorted({(c, p) for c, p, _, _ in entries})
        for country, product in pairs:
            variables = sorted(v for c, p, v, _ in entries if (c, p) == (country, product))
            # materialize each npz member once; indexing the lazy NpzFile
            # would re-decompress the full array on every access
            data = {}
            for v in variables:
                with np.load(npz_paths[(country, product, v)]) as npz:
                    data[v] = {k: npz[k] for k in npz.files}
            first = data[variables[0]]
            hids = [str(h) for h in first["household_ids"]]
            start = dt.date.fromisoformat(str(first["start_date"]))
            n_days = first["values"].shape[1]
            window = windows[country]
            region_ranges = self._season_ranges(window, start, n_days)
            for i, hid in enumerate(hids):
                region = resolve_region(window, coords[hid])
                seasons = region_ranges[region]
                base_by_season = {}
                for label_year, sstart, i0, i1 in seasons:
                    try:
                        if "precip" in variables:
                            vals = first["values"][i, i0:i1].astype(np.float64)
                            base = rainfall_base(vals, self.metric_config)
                        else:
                            sm = SeasonSlice(hid, product, label_year, sstart,
                                             data["temp_mean"]["values"][i, i0:i1].astype(np.float64))
                            sx = SeasonSlice(hid, product, label_year, sstart,
                                             data["temp_max"]["values"][i, i0:i1].astype(np.float64))
                            base = temperature_base(sm, sx, self.metric_config)
                    except MetricError as exc:
                        skipped.append({"household_id": hid, "product_id": product,
                                        "country": country, "season_year": label_year,
                                        "reason": str(exc)})
                        continue
                    base_by_season[label_year] = (sstart, base)
                clim = {}
                for base_id in CLIMATOLOGY_BASES:
                    vals = [(s, b[base_id]) for s, b in base_by_season.values() if base_id in b]
                    if len(vals) >= 2:
                        clim[base_id] = build_climatology(vals, hid, product, base_id)
                metric_ids = RAINFALL_METRICS if "precip" in variables else TEMPERATURE_METRICS
                for label_year, (sstart, base) in sorted(base_by_season.items()):
                    row = {"household_id": hid, "product_id": product,
                           "country": country, "season_year": label_year}
                    row.update(self._finalize(base, clim, metric_ids))
                    wide_rows.append(row)

        wide = pd.DataFrame(wide_rows)
        ordered = ["household_id", "product_id", "country", "season_year"] + [
            m for m in ALL_METRICS if m in wide.columns
        ]
        wide = wide.loc[:, ordered].sort_values(
            ["country", "product_id", "household_id", "season_year"]
        )
        wide.to_csv(out_dir / "metrics_wide.csv", index=False)
        long = wide.melt(
            id_vars=["household_id", "product_id", "country", "season_year"],
            var_name="metric_id", value_name="value",
        ).dropna(subset=["value"]).sort_values(
            ["country", "product_id", "household_id", "season_year", "metric_id"]
        )
        long.to_csv(out_dir / "metrics_long.csv", index=False)
        meta = {
            "metric_config": self.metric_config.to_dict(),
            "n_rows": len(wide),
            "skipped_slices": skipped,
        }
        with open(out_dir / "metrics_meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs = [out_dir / "metrics_wide.csv", out_dir / "metrics_long.csv",
                   out_dir / "metrics_meta.json"]
        self.manifest.record("metrics", key, outputs, self.out)

    def _finalize(self, base: dict, clim: dict, metric_ids) -> dict:
        out = {}
        for m in metric_ids:
            if m in base:
                out[m] = base[m]
        for m in metric_ids:
            b = CLIMATOLOGY_BASE.get(m)
            if b is None:
                continue
            c = clim.get(b)
            if c is None:
                out[m] = float("nan")
            elif m.startswith("dev_"):
                out[m] = base[b] - c.long_run_mean
            elif c.degenerate:
                out[m] = float("nan")
            else:
                out[m] = (base[b] - c.long_run_mean) / c.long_run_sd
        return out

    def _season_ranges(self, window, start: dt.date, n_days: int) -> dict:
        """Per region: (label_year, season start, start index, stop index)."""
        end = start + dt.timedelta(days=n_days - 1)
        ranges = {}
        for region_id, region in enumerate(window.regions):
            rows = []
            for year in range(start.year - 1, end.year + 1):
                s, e = season_dates(region, year)
                if s < start or e > end:
                    continue
                rows.append((year, s, (s - start).days, (e - start).days + 1))
            ranges[region_id] = rows
        return ranges

    def stage_battery(self) -> None:
        m_dir = self.out / "metrics"
        wide_path = self._require(m_dir / "metrics_wide.csv", "metrics")
        panel_path = self._require(self.panel_path(), "synth" if "synth" in self.config else "ingest")
        bc = self.battery_config()
        input_hash = sha256_json({
            "metrics": sha256_file(wide_path),
            "panel": sha256_file(panel_path),
            "battery": config_hash(bc),
        })
        key = sha256_json({"input": input_hash, "blind": bc.blind_seed})
        out_dir = self.out / "battery"
        if not self.force and self.manifest.stage_fresh("battery", key, self.out):
            return
        out_dir.mkdir(parents=True, exist_ok=True)

        panel = pd.read_csv(panel_path, dtype={"household_id": str, "country_id": str})
        wide = pd.read_csv(wide_path, dtype={"household_id": str, "country": str,
                                             "product_id": str})
        bmap = None
        if bc.blind_seed is not None:
            bmap = blind(bc, bc.blind_seed)
            save_blindmap(bmap, out_dir / "blindmap.json")
        previous = None
        results_path = out_dir / "results.jsonl"
        if results_path.exists() and not self.force:
            previous = load_results_jsonl(results_path)
        results, failures = run_battery(
            bc, panel, wide, wave_map=self.wave_map(), workers=self.workers,
            blinding=bmap, input_hash=input_hash, previous=previous,
        )
        save_results_jsonl(results, results_path)
        fail_df = pd.DataFrame(failures, columns=[
            "spec_id", "country", "model", "outcome", "metric", "product",
            "error", "message",
        ])
        fail_df.to_csv(out_dir / "failures.csv", index=False)
        outputs = [results_path, out_dir / "failures.csv"]
        if bmap is not None:
            outputs.append(out_dir / "blindmap.json")
        self.manifest.record("battery", key, outputs, self.out)

    def stage_analyze(self) -> None:
        b_dir = self.out / "battery"
        results_path = self._require(b_dir / "results.jsonl", "battery")
        failures_path = self._require(b_dir / "failures.csv", "battery")
        metrics_long_path = self._require(self.out / "metrics" / "metrics_long.csv", "metrics")
        acfg = self.config.get("analyze", {})
        key = sha256_json({
            "results": sha256_file(results_path),
            "failures": sha256_file(failures_path),
            "metrics_long": sha256_file(metrics_long_path),
            "analyze": acfg,
        })
        out_dir = self.out / "analyze"
        if not self.force and self.manifest.stage_fresh("analyze", key, self.out):
            return
        (out_dir / "specchart").mkdir(parents=True, exist_ok=True)
        (out_dir / "bumpline").mkdir(parents=True, exist_ok=True)
        (out_dir / "descriptives").mkdir(parents=True, exist_ok=True)

        records = load_results_jsonl(results_path)
        df = results_frame(records)
        failures = pd.read_csv(failures_path)
        alpha = acfg.get("alpha", 0.05)

        outputs = []
        heur = significance_shares(df, failures=failures)
        heur_path = out_dir / "heuristics.csv"
        heur.to_csv(heur_path, index=False)
        outputs.append(heur_path)

        if not df.empty:
            for (country, metric), _ in df.groupby(["country", "metric"], sort=True):
                doc = spec_chart(df, country, metric, alpha=alpha)
                p = out_dir / "specchart" / f"{country}.{metric}.json"
                save_document(doc, p)
                outputs.append(p)
                doc = bumpline(df, country, metric,
                               use_absolute=acfg.get("rank_absolute", False))
                p = out_dir / "bumpline" / f"{country}.{metric}.json"
                save_document(doc, p)
                outputs.append(p)

        long = pd.read_csv(metrics_long_path, dtype={"household_id": str})
        for metric_id in acfg.get("descriptive_metrics", ["no_rain_days", "gdd"]):
            desc = descriptives(long, metric_id)
            p = out_dir / "descriptives" / f"{metric_id}.csv"
            desc.to_csv(p, index=False)
            outputs.append(p)
        self.manifest.record("analyze", key, outputs, self.out)

    def unblind(self, map_path) -> None:
        bc = self.battery_config()
        bmap = load_blindmap(map_path)
        results_path = self._require(self.out / "battery" / "results.jsonl", "battery")
        records = load_results_jsonl(results_path)
        records = unblind_records(records, bmap, bc)
        records.sort(key=lambda r: r["spec_id"])
        save_results_jsonl(records, results_path)
