#!/usr/bin/env python3
"""
CA-HCBF 異質多機器人安全控制模擬主程式

使用方式:
    # 單一情境（檔案或隨機生成）
    python main.py run --scenario scenario.json --method cahcbf --alloc full
    python main.py run --random N=10 --seed 7 --trials 5 --log-level traj

    # 基準比較表與分配策略消融
    python main.py suite --preset table --sizes 10,20 --trials 50 --workers 4
    python main.py suite --preset ablation
    python main.py suite --variant cahcbf:cap:0.9 --variant apf:full:0.3 --sizes 10

    # 匯出情境 JSON
    python main.py scenario --random N=10 --seed 3 --out scenario.json
    python main.py scenario --random N=5 --antipodal --out antipodal.json

結束碼: 0 成功、2 設定錯誤、3 情境錯誤、1 其他失敗
"""
import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from loguru import logger

# 設定專案路徑
PROJECT_ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(PROJECT_ROOT))

from config.settings import DEFAULT_TRIALS, LOG_CONFIG, OUTPUT_CONFIG, SCENARIO_PARAMS, SUITE_PRESETS, WORKERS
from data.scenario import generate_antipodal_scenario, generate_scenario, load_scenario, save_scenario
from data.sqlite_database import ResultsDatabase
from exporters.result_exporter import ResultExporter, format_report
from tasks.simulation import Method, SimConfig
from tasks.suite_task import CUSTOM_PRESET, SuiteTask, parse_variant, resolve_preset, summarize
from tasks.trial_task import TrialTask
from utils.errors import CahcbfError, ConfigError, ScenarioError
from utils.rng import trial_rng, trial_seed

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SCENARIO = 3

OUTPUT_LEVELS = ("metrics", "traj", "pairs")


def setup_logging():
    """設定日誌：stderr 依 LOG_LEVEL，另寫入每日輪替的日誌檔"""
    log_path = Path(LOG_CONFIG["file"])
    log_path.parent.mkdir(parents=True, exist_ok=True)

    logger.remove()
    logger.add(sys.stderr, level=LOG_CONFIG["level"], format=LOG_CONFIG["format"])
    logger.add(
        LOG_CONFIG["file"],
        level=LOG_CONFIG["level"],
        format=LOG_CONFIG["format"],
        rotation="1 day",
        retention="30 days",
    )


def _agent_count(text: str) -> int:
    """解析 N=<n> 或 <n>"""
    value = text.split("=", 1)[1] if text.upper().startswith("N=") else text
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"機器人數量格式錯誤: {text}，請使用 N=<n>")
    if n <= 0:
        raise argparse.ArgumentTypeError(f"機器人數量必須為正: {text}")
    return n


def _sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"隊伍規模格式錯誤: {text}，請使用 10,20,30")


def _variant(text: str) -> dict:
    try:
        return parse_variant(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="CA-HCBF 異質多機器人安全控制模擬",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="執行單一情境")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", type=Path, help="情境 JSON 檔")
    source.add_argument("--random", type=_agent_count, metavar="N=<n>", help="隨機混合隊伍")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--method", choices=[m.value for m in Method], default=Method.CAHCBF.value)
    run.add_argument("--alloc", choices=["equal", "cap", "full"], default=None)
    run.add_argument("--w", type=float, default=None, help="APF 吸引權重")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--steps", type=int, default=None, help="步數上限")
    run.add_argument("--out", type=Path, default=Path(OUTPUT_CONFIG["out_dir"]))
    run.add_argument("--log-level", choices=OUTPUT_LEVELS, default="metrics", dest="output_level")
    run.add_argument("--db", nargs="?", const=OUTPUT_CONFIG["db_path"], default=None)

    suite = sub.add_parser("suite", help="執行批次實驗")
    matrix = suite.add_mutually_exclusive_group(required=True)
    matrix.add_argument("--preset", choices=sorted(SUITE_PRESETS))
    matrix.add_argument(
        "--variant", type=_variant, action="append", metavar="METHOD:ALLOC:W",
        help="自訂方法變體，可重複指定，例如 cahcbf:cap:0.9",
    )
    suite.add_argument("--sizes", type=_sizes, default=None)
    suite.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--steps", type=int, default=None)
    suite.add_argument("--workers", type=int, default=WORKERS)
    suite.add_argument("--out", type=Path, default=Path(OUTPUT_CONFIG["out_dir"]))
    suite.add_argument("--db", nargs="?", const=OUTPUT_CONFIG["db_path"], default=None)

    scenario = sub.add_parser("scenario", help="匯出情境 JSON")
    scenario.add_argument("--random", type=_agent_count, metavar="N=<n>", required=True)
    scenario.add_argument("--seed", type=int, default=0)
    scenario.add_argument("--antipodal", action="store_true", help="對蹠交換情境")
    scenario.add_argument("--radius", type=float, default=SCENARIO_PARAMS["antipodal_radius"])
    scenario.add_argument("--out", type=Path, required=True)

    return parser


def cmd_run(args: argparse.Namespace) -> int:
    """執行單一情境（可重複多次試驗）"""
    if args.trials <= 0:
        raise ConfigError(f"trials 必須為正: {args.trials}")
    if args.seed < 0:
        raise ConfigError(f"seed 必須非負: {args.seed}")

    logger.info(f"=== 開始執行 {args.method}，共 {args.trials} 次試驗 ===")
    base = load_scenario(args.scenario) if args.scenario else None

    rows, trajectories, pairs = [], [], []
    cfg = None
    for t in range(args.trials):
        scenario = base or generate_scenario(args.random, rng=trial_rng(args.seed, t))
        cfg = SimConfig.build(
            scenario.sim,
            scenario.nominal,
            method=args.method,
            strategy=args.alloc,
            w=args.w,
            seed=trial_seed(args.seed, t),
            max_steps=args.steps,
            record_pairs=args.output_level == "pairs",
        )
        result = TrialTask(cfg, record_trajectory=args.output_level != "metrics").run(scenario, t)
        if not result["success"]:
            logger.error(f"試驗 {t} 失敗: {result['errors']}")
            return EXIT_FAILURE

        rows.append({
            "variant": 0,
            "method": cfg.method.value,
            "alloc": cfg.alloc.strategy.value,
            "w": cfg.w,
            "n_agents": scenario.n_agents,
            "trial": t,
            "seed": trial_seed(args.seed, t),
            **result["metrics"].to_dict(),
        })
        if result["trajectory"] is not None:
            trajectories.append(result["trajectory"])
        if result["pairs"] is not None:
            pairs.append(result["pairs"])

    df = pd.DataFrame(rows)
    summary = summarize(df)
    exporter = ResultExporter(args.out)
    exporter.export_metrics(df.to_dict(orient="records"), {**cfg.describe(), "seed": args.seed, "trials": args.trials}, summary)
    exporter.export_report(format_report(summary, title=f"單一情境 {cfg.method.value}"))
    if trajectories:
        exporter.export_trajectory(pd.concat(trajectories, ignore_index=True))
    if pairs:
        exporter.export_pairs(pd.concat(pairs, ignore_index=True))

    if args.db:
        ResultsDatabase(args.db).save_suite("run", args.seed, args.trials, df, max_steps=cfg.max_steps)

    logger.info(f"=== 執行完成，平均 AR {df['arrival_rate'].mean():.1%} ===")
    return EXIT_OK


def cmd_suite(args: argparse.Namespace) -> int:
    """執行批次實驗並輸出比較表"""
    if args.trials <= 0:
        raise ConfigError(f"trials 必須為正: {args.trials}")
    preset = args.preset or CUSTOM_PRESET
    variants, sizes = resolve_preset(preset, args.sizes, args.variant)

    result = SuiteTask(workers=args.workers).run(
        preset, sizes, args.trials, args.seed, args.steps, variants=args.variant
    )
    if not result["success"]:
        logger.error(f"批次實驗失敗: {result['errors']}")
        return EXIT_FAILURE

    df, summary = result["trials"], result["summary"]
    exporter = ResultExporter(args.out)
    config = {
        "preset": preset,
        "variants": variants,
        "sizes": sizes,
        "trials": args.trials,
        "seed": args.seed,
        "max_steps": args.steps,
    }
    exporter.export_metrics(df.to_dict(orient="records"), config, summary)
    report = format_report(summary, title=f"批次實驗 {preset}")
    exporter.export_report(report)
    print(report)

    if args.db:
        ResultsDatabase(args.db).save_suite(preset, args.seed, args.trials, df, max_steps=args.steps)
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    """匯出情境 JSON"""
    if args.antipodal:
        scenario = generate_antipodal_scenario(args.random, radius=args.radius)
    else:
        scenario = generate_scenario(args.random, rng=trial_rng(args.seed, 0))
    save_scenario(scenario, args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "suite": cmd_suite,
    "scenario": cmd_scenario,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主程式進入點"""
    args = build_parser().parse_args(argv)
    setup_logging()

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"設定錯誤: {e}")
        return EXIT_CONFIG
    except ScenarioError as e:
        logger.error(f"情境錯誤: {e}")
        return EXIT_SCENARIO
    except CahcbfError as e:
        logger.error(f"執行失敗: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"未預期錯誤: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
