#!/usr/bin/env python3
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def pin_single_thread(argv) -> bool:
    """Fixa os pools BLAS/OpenMP em uma thread; precisa rodar antes do primeiro import do numpy."""
    if "--single-thread" in argv or os.getenv("RSL_SINGLE_THREAD", "false").lower() == "true":
        for name in _THREAD_VARS:
            os.environ[name] = "1"
        return True
    return False


pin_single_thread(sys.argv)

import argparse  # noqa: E402
import contextlib  # noqa: E402

from threadpoolctl import threadpool_limits  # noqa: E402

from config import load_run_config, runtime_config  # noqa: E402
from errors import RslError  # noqa: E402
from graph.datasets import make_sbm_dataset, make_toy_dataset, write_dataset  # noqa: E402
from logger import configure_logging, get_logger  # noqa: E402
from metrics import export_metrics  # noqa: E402
from models.models import BaselineMode  # noqa: E402
from services import artifacts  # noqa: E402
from services.pipeline import STAGES, run_pipeline, run_stage  # noqa: E402

configure_logging(runtime_config.debug, runtime_config.log_level)
logger = get_logger(__name__)

COMMANDS = ("run",) + STAGES + ("gen-toy", "gen-sbm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Detecção de nós OOD em grafos por ressonância de atributos")
    parser.add_argument("command", choices=COMMANDS, help="Etapa a executar")
    parser.add_argument("--config", type=str, default=None, help="Arquivo de configuração key = value")
    parser.add_argument("--seed", type=int, default=None, help="Sobrescreve a semente do arquivo")
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help=f"Diretório de saída (default: output_dir da configuração ou {runtime_config.output_dir})",
    )
    parser.add_argument(
        "--baseline",
        type=str,
        choices=[mode.value for mode in BaselineMode],
        default=None,
        help="Pontuação por distância ao protótipo incluída em scores.csv",
    )
    parser.add_argument(
        "--single-thread",
        action="store_true",
        help="Uma única thread BLAS (execuções reprodutíveis bit a bit)",
    )
    return parser


def thread_limit(requested: bool):
    """Limita os pools BLAS/OpenMP já carregados a uma thread durante o comando."""
    if requested or runtime_config.single_thread:
        return threadpool_limits(limits=1)
    return contextlib.nullcontext()


def cli(argv=None) -> int:
    """Interface de linha de comando do pipeline"""
    args = build_parser().parse_args(argv)
    out_dir = args.out
    try:
        cfg = load_run_config(args.config, {"seed": args.seed, "baseline": args.baseline})
        out_dir = out_dir or cfg.output_dir or runtime_config.output_dir
        log = logger.bind(command=args.command, out_dir=out_dir, seed=cfg.seed)
        log.info("cli_started", config=args.config)
        os.makedirs(out_dir, exist_ok=True)
        artifacts.clear_failed_marker(out_dir)

        with thread_limit(args.single_thread):
            if args.command == "gen-toy":
                write_dataset(out_dir, make_toy_dataset(cfg.toy_spec()))
            elif args.command == "gen-sbm":
                write_dataset(out_dir, make_sbm_dataset(cfg.sbm_spec()))
            elif args.command == "run":
                run_pipeline(cfg, out_dir, cfg.baseline)
            else:
                run_stage(args.command, cfg, out_dir, cfg.baseline)
        log.info("cli_finished")
        return 0
    except RslError as e:
        e.with_stage(args.command)
        logger.error("cli_failed", command=args.command, stage=e.stage, error=str(e), exit_code=e.exit_code)
        if out_dir:
            artifacts.write_failed_marker(out_dir, e)
        return e.exit_code
    except Exception as e:
        logger.error("cli_unexpected_error", command=args.command, error=str(e), exc_info=True)
        if out_dir:
            artifacts.write_failed_marker(out_dir, RslError(str(e), stage=args.command))
        return 1
    finally:
        if out_dir and os.path.isdir(out_dir):
            export_metrics(os.path.join(out_dir, runtime_config.metrics_filename))


if __name__ == "__main__":
    sys.exit(cli())
