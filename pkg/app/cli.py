"""
SkiTrack 命令行入口

命令:
  synth-gen     生成合成多机位评测集（含期望结果）
  run           按运行配置执行跟踪流水线
  eval          评测预测轨迹，输出报告与结果表
  compare       对比两份评测报告
  check-client  对跟踪器客户端运行一致性检查

退出码: 0 成功；1 有阶段错误或检查未通过；2 配置错误（在任何处理开始之前）
"""

import argparse
import logging
import shlex
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.clients.base import TrackerClient
from app.clients.conformance import default_requests, run_conformance
from app.clients.subprocess_tracker import SubprocessTrackerClient
from app.core.config import settings
from app.core.errors import ConfigError, SkiTrackError
from app.dataio.reports import load_metric_report, save_comparison, save_metric_report
from app.dataio.run_config import load_run_config
from app.dataio.text import read_json, write_json
from app.models.geometry import BoundingBox
from app.models.sequence import Discipline
from app.schemas.report import SequenceScore
from app.schemas.run_config import EvalConfig
from app.schemas.synth import SynthSpec, SynthSuiteSpec
from app.services.eval_service import EvaluationService, ablation_compare, aggregate, render_comparison, render_table
from app.services.pipeline_service import (
    FINAL_TRACK_FILE,
    PipelineService,
    compute_expected_results,
    preflight,
)
from app.services.synth_service import default_suite_spec, generate_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def _parse_box(text: str) -> BoundingBox:
    try:
        return BoundingBox.from_list([float(v) for v in text.split(",")])
    except (ValueError, SkiTrackError):
        raise ConfigError(f"无法解析边界框 {text!r}，需要 x,y,w,h")


# ---- synth-gen ----

def _load_suite_spec(path: str) -> SynthSuiteSpec:
    data = read_json(path)
    try:
        if isinstance(data, dict) and "sequences" in data:
            return SynthSuiteSpec.model_validate(data)
        return SynthSuiteSpec(sequences=[SynthSpec.model_validate(data)])
    except ValidationError as e:
        raise ConfigError(f"合成规格无效: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}")


def cmd_synth_gen(args: argparse.Namespace) -> int:
    if args.spec:
        suite = _load_suite_spec(args.spec)
    else:
        suite = default_suite_spec(seed=args.seed, embedding_noise=args.embedding_noise)
    config_path, sequences = generate_suite(suite, args.out, tracker_noise=args.tracker_noise)
    print(f"评测集已生成: {args.out}（{len(sequences)} 条序列）")
    print(f"运行配置: {config_path}")

    if args.no_expected:
        return EXIT_OK
    switched = {sequence.manifest.sequence_id: sequence.switched_clips for sequence in sequences}
    expected = compute_expected_results(config_path, switched)
    write_json(Path(args.out) / "expected_results.json", expected)
    print(
        f"期望结果: 开启校正 F1={expected['overall_f1_with_reid']:.4f}, "
        f"关闭校正 F1={expected['overall_f1_without_reid']:.4f}"
    )
    return EXIT_OK


# ---- run ----

def _run_overrides(args: argparse.Namespace) -> Dict[str, object]:
    return {
        "output_dir": args.out,
        "mode": args.mode,
        "seed": args.seed,
        "workers": args.workers,
        "reid.similarity_threshold": args.theta,
        "reid.clip_aggregation": args.aggregation,
        "reid.enabled": False if args.no_reid else None,
        "fusion.iou_threshold": args.tau,
        "kalman.process_noise_pos": args.kalman_q_pos,
        "kalman.process_noise_vel": args.kalman_q_vel,
        "kalman.measurement_noise": args.kalman_r,
        "kalman.initial_velocity_variance": args.kalman_init_vel,
        "kalman.gate_iou": args.gate_iou,
        "tracker.kind": args.tracker,
        "tracker.command": shlex.split(args.tracker_command) if args.tracker_command else None,
        "tracker.timeout": args.tracker_timeout,
        "tracker.noise_sigma": args.noise_sigma,
    }


def cmd_run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, _run_overrides(args))
    preflight(config)
    report = PipelineService(config).run()
    for result in report.sequences:
        if result.status == "error":
            print(f"{result.sequence_id}: 失败 {result.error}")
            continue
        corrected = [c.clip_id for c in result.reid.clips if c.action == "corrected"] if result.reid else []
        print(f"{result.sequence_id}: 完成 (模式={result.mode}, 校正片段={corrected or '无'})")
        for warning in result.warnings:
            print(f"  警告: {warning}")
    print(f"输出目录: {config.output_dir}")
    return EXIT_FAILURE if report.failed else EXIT_OK


# ---- eval ----

def discover_triples(pred_dir: Path, gt_dir: Path) -> List[Tuple[Path, Path, Path]]:
    """在评测集目录中找到 <序列>/manifest.json 与 gt.csv，并匹配 <预测目录>/<序列>/final_track.csv"""
    triples = []
    for manifest in sorted(gt_dir.glob("*/manifest.json")):
        name = manifest.parent.name
        pred = pred_dir / name / FINAL_TRACK_FILE
        if not pred.is_file():
            raise ConfigError(f"缺少序列 {name} 的预测文件: {pred}")
        triples.append((pred, manifest.parent / "gt.csv", manifest))
    if not triples:
        raise ConfigError(f"{gt_dir} 下没有任何 */manifest.json")
    return triples


def _scores_report(path: str, cfg: EvalConfig):
    """从 [{sequence_id, discipline, precision, recall, f1}] 直接聚合"""
    data = read_json(path)
    scores: Dict[str, SequenceScore] = {}
    disciplines: Dict[str, Discipline] = {}
    try:
        for item in data:
            scores[item["sequence_id"]] = SequenceScore(
                precision=item["precision"], recall=item["recall"], f1=item["f1"],
                frames_evaluated=item.get("frames_evaluated", 0),
            )
            disciplines[item["sequence_id"]] = Discipline.parse(item["discipline"])
    except (KeyError, TypeError, ValidationError) as e:
        raise ConfigError(f"{path}: 分数列表格式错误: {e}")
    return aggregate(scores, disciplines, cfg.protocol, cfg.setting)


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = EvalConfig(
        protocol=args.protocol, setting=args.setting,
        hit_iou_threshold=args.hit_iou if args.hit_iou is not None else settings.EVAL_HIT_IOU_THRESHOLD,
    )
    if args.scores:
        report = _scores_report(args.scores, cfg)
    elif args.pred_dir or args.gt_dir:
        if not (args.pred_dir and args.gt_dir):
            raise ConfigError("--pred-dir 与 --gt-dir 需要同时提供")
        report = EvaluationService(cfg).evaluate_files(discover_triples(Path(args.pred_dir), Path(args.gt_dir)))
    else:
        if not (args.pred and args.gt and args.manifest) or not len(args.pred) == len(args.gt) == len(args.manifest):
            raise ConfigError("--pred/--gt/--manifest 需要成组提供且数量一致")
        report = EvaluationService(cfg).evaluate_files(zip(args.pred, args.gt, args.manifest))

    if args.out:
        save_metric_report(report, args.out)
    print(render_table({args.label: report}))
    if report.missing_disciplines:
        print(f"缺少项目: {', '.join(d.value for d in report.missing_disciplines)}（总体只对其余项目平均）")
    return EXIT_OK


# ---- compare ----

def cmd_compare(args: argparse.Namespace) -> int:
    a = load_metric_report(args.a)
    b = load_metric_report(args.b)
    summary = ablation_compare(a, b)
    if args.out:
        save_comparison(summary, args.out)
    print(render_table({args.label_a: a, args.label_b: b}))
    print()
    print(render_comparison(summary))
    return EXIT_OK


# ---- check-client ----

def _clients_from_config(args: argparse.Namespace) -> List[Tuple[TrackerClient, list]]:
    config = load_run_config(args.config)
    preflight(config)
    service = PipelineService(config)
    index = args.sequence
    if not 0 <= index < len(config.sequences):
        raise ConfigError(f"--sequence {index} 超出序列数 {len(config.sequences)}")
    bundle = service.load_inputs(config.sequences[index])
    client = service.default_tracker(bundle)
    requests = []
    reference = bundle.ground_truth.as_track() if bundle.ground_truth else bundle.base_track
    for clip in bundle.manifest.clips:
        record = reference[clip.middle_frame] if reference is not None else None
        if record is None or not record.present:
            logger.warning(f"片段 {clip.clip_id} 中间帧没有参考框，跳过")
            continue
        requests.extend(
            default_requests(bundle.sequence_id, clip.start_frame, clip.end_frame, record.box)
        )
    return [(client, requests)]


def cmd_check_client(args: argparse.Namespace) -> int:
    if args.config:
        pairs = _clients_from_config(args)
    elif args.command:
        client = SubprocessTrackerClient(shlex.split(args.command), timeout=args.timeout)
        requests = default_requests("check", args.start, args.end, _parse_box(args.prompt_box))
        pairs = [(client, requests)]
    else:
        raise ConfigError("需要 --config 或 --command")

    passed = True
    for client, requests in pairs:
        with client:
            report = run_conformance(client, requests)
        print(report.render())
        passed = passed and report.passed
    return EXIT_OK if passed else EXIT_FAILURE


# ---- 参数解析 ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skitrack", description="多机位滑雪者跟踪：ReID 身份校正、后处理与评测")
    parser.add_argument("--log-level", default=None, help="日志级别（默认取 LOG_LEVEL）")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    synth = sub.add_parser("synth-gen", help="生成合成评测集")
    synth.add_argument("--out", required=True, help="输出目录")
    synth.add_argument("--spec", help="合成规格 JSON（单个 SynthSpec 或 {sequences: [...]}）；缺省为默认三序列评测集")
    synth.add_argument("--seed", type=int, default=settings.PIPELINE_SEED, help="默认评测集的随机种子")
    synth.add_argument("--embedding-noise", type=float, default=0.05, help="默认评测集的特征噪声σ_e")
    synth.add_argument("--tracker-noise", type=float, default=0.5, help="oracle 跟踪器的框噪声（像素）")
    synth.add_argument("--no-expected", action="store_true", help="不计算期望结果")
    synth.set_defaults(handler=cmd_synth_gen)

    run = sub.add_parser("run", help="执行跟踪流水线")
    run.add_argument("--config", required=True, help="运行配置 JSON")
    run.add_argument("--out", help="输出目录（覆盖配置）")
    run.add_argument("--mode", choices=["single_skier", "multi_skier"], help="后处理路径（默认由项目决定）")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, help="并行处理的序列数")
    run.add_argument("--theta", type=float, help=f"片段相似度阈值θ（默认 {settings.REID_SIMILARITY_THRESHOLD}）")
    run.add_argument("--aggregation", choices=["mean", "median"], help="片段相似度聚合方式")
    run.add_argument("--no-reid", action="store_true", help="跳过身份校正阶段")
    run.add_argument("--tau", type=float, help=f"融合 IoU 阈值τ（默认 {settings.FUSION_IOU_THRESHOLD}）")
    run.add_argument("--kalman-q-pos", type=float, help="位置过程噪声")
    run.add_argument("--kalman-q-vel", type=float, help="速度过程噪声")
    run.add_argument("--kalman-r", type=float, help="观测噪声")
    run.add_argument("--kalman-init-vel", type=float, help="初始速度方差")
    run.add_argument("--gate-iou", type=float, help="检测关联 IoU 门限")
    run.add_argument("--tracker", choices=["oracle", "replay", "subprocess"], help="跟踪器客户端类型")
    run.add_argument("--tracker-command", help="subprocess 后端命令")
    run.add_argument("--tracker-timeout", type=float, help="每个片段的超时（秒）")
    run.add_argument("--noise-sigma", type=float, help="oracle 跟踪器的框噪声")
    run.set_defaults(handler=cmd_run)

    ev = sub.add_parser("eval", help="评测预测轨迹")
    ev.add_argument("--pred", action="append", help="预测轨迹 CSV（可重复）")
    ev.add_argument("--gt", action="append", help="真值标注 CSV（可重复）")
    ev.add_argument("--manifest", action="append", help="序列清单 JSON（可重复）")
    ev.add_argument("--pred-dir", help="run 的输出目录")
    ev.add_argument("--gt-dir", help="评测集目录（含 <序列>/manifest.json 与 gt.csv）")
    ev.add_argument("--scores", help="逐序列分数 JSON 列表，直接聚合")
    ev.add_argument("--protocol", choices=["iou", "hit"], default="iou", help="逐帧质量定义")
    ev.add_argument("--hit-iou", type=float, help="hit 协议的 IoU 阈值")
    ev.add_argument("--setting", choices=["mc", "sc"], default="mc", help="多机位(mc)或单机位(sc)评测单元")
    ev.add_argument("--label", default="method", help="结果表中的方法名")
    ev.add_argument("--out", help="评测报告输出路径")
    ev.set_defaults(handler=cmd_eval)

    cmp_parser = sub.add_parser("compare", help="对比两份评测报告")
    cmp_parser.add_argument("--a", required=True, help="基准报告")
    cmp_parser.add_argument("--b", required=True, help="对比报告")
    cmp_parser.add_argument("--label-a", default="A")
    cmp_parser.add_argument("--label-b", default="B")
    cmp_parser.add_argument("--out", help="对比结果输出路径")
    cmp_parser.set_defaults(handler=cmd_compare)

    check = sub.add_parser("check-client", help="跟踪器客户端一致性检查")
    check.add_argument("--config", help="运行配置 JSON，使用其中的跟踪器配置")
    check.add_argument("--sequence", type=int, default=0, help="使用配置中的第几条序列")
    check.add_argument("--command", help="直接检查一个 subprocess 后端命令")
    check.add_argument("--start", type=int, default=0)
    check.add_argument("--end", type=int, default=20)
    check.add_argument("--prompt-box", default="100,100,40,80", help="提示框 x,y,w,h")
    check.add_argument("--timeout", type=float, default=settings.TRACKER_TIMEOUT)
    check.set_defaults(handler=cmd_check_client)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"配置错误: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except SkiTrackError as e:
        print(f"错误: {e.message} ({e.error_code})", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
