# app/ui/cli_interface.py
import argparse
import logging
import shlex
import sys
from typing import Any, Optional, Sequence

from app.config import get_worker_count, load_run_config
from app.errors import (
    ConfigError,
    DatumFormatError,
    FrameworkError,
    LimitExceeded,
    MorphTestError,
    ProtocolViolation,
    SchemaViolation,
    StorageError,
    SubjectUnavailable,
    UnknownFitness,
)
from app.models.datum import Number, from_tagged_json
from app.models.framework import Framework, MorphParams
from app.models.records import ExternalSubject, InProcessSubject, Outcome, Subject, Verdict, VerdictSummary
from app.models.run_config import STRATEGIES, GenerateSection, RunConfig
from app.services.analytics import build_metric_table, emit_report, pearson, read_vector, summarize, write_report
from app.services.checker import MetamorphismChecker
from app.services.exploration import ExploreConfig, explore_boundary
from app.services.generation import GenLimits, PoolGenerator, measure_kway_coverage
from app.services.optimal import GaConfig, generate_optimal
from app.services.runner import execute_pool
from app.services.storage import (
    dump_pool,
    dump_records,
    dump_verdicts,
    load_pool,
    load_records,
    load_verdicts,
    read_file,
    write_file,
)
from app.subjects.registry import SubjectRegistry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2
EXIT_LIMIT = 3
EXIT_UNAVAILABLE = 4
EXIT_PROTOCOL = 5
EXIT_ENGINE = 6

DEFAULT_POOL_PATH = "pool.json"
DEFAULT_RECORDS_PATH = "records.json"
DEFAULT_VERDICTS_PATH = "verdicts.json"

CONFIG_ERRORS = (ConfigError, FrameworkError, SchemaViolation, DatumFormatError, StorageError, UnknownFitness)


def _pick(value: Any, fallback: Any) -> Any:
    return fallback if value is None else value


class CommandLineInterface:
    """
    Batch command line over the engine. Each subcommand is one pipeline stage and the
    stages exchange files: generate -> run -> check -> stats.
    """

    def __init__(self, registry: Optional[SubjectRegistry] = None):
        self.registry = registry or SubjectRegistry.bundled()
        self.parser = self.create_parser()
        logger.debug("CommandLineInterface initialized.")

    def create_parser(self) -> argparse.ArgumentParser:
        # global flags are accepted before or after the subcommand
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", default=argparse.SUPPRESS, help="Run configuration JSON file.")
        common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (unsigned 64-bit).")
        common.add_argument("--out", default=argparse.SUPPRESS, help="Output file of the command.")
        common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="Report format.")
        common.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                            help="Exit with status 1 when any metamorphism fails.")
        common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                            help="Concurrent subject executions (fallback: MORPHTEST_WORKERS).")
        common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="Debug logging.")

        parser = argparse.ArgumentParser(prog="morphtest", description="Datamorphic test engine.", parents=[common])
        commands = parser.add_subparsers(dest="command_name", metavar="COMMAND")
        commands.required = True

        framework_args = argparse.ArgumentParser(add_help=False)
        framework_args.add_argument("--framework", help="Bundled framework name.")
        framework_args.add_argument("--seeds", type=int, help="Number of seeds the bundled framework generates.")
        framework_args.add_argument("--threshold", type=float, help="Similarity threshold of synth_recognizer.")

        subject_args = argparse.ArgumentParser(add_help=False)
        subject_args.add_argument("--subject", help="Bundled subject name, e.g. sine_correct or classifier:0.5.")
        subject_args.add_argument("--command", dest="subject_command", help="External subject command line.")
        subject_args.add_argument("--timeout-ms", type=int, help="Per-request timeout of an external subject.")

        generate = commands.add_parser("generate", parents=[common, framework_args, subject_args],
                                       help="Generate a test pool.")
        generate.add_argument("--strategy", choices=STRATEGIES)
        generate.add_argument("--k", type=int)
        generate.add_argument("--count", type=int)
        generate.add_argument("--generations", type=int)
        generate.add_argument("--population", type=int)
        generate.add_argument("--fitness")
        generate.add_argument("--max-pool-size", type=int)
        generate.add_argument("--max-depth", type=int)
        generate.add_argument("--distinct-only", action="store_true", default=None)

        run = commands.add_parser("run", parents=[common, framework_args, subject_args],
                                  help="Execute a subject on a pool.")
        run.add_argument("--pool")

        check = commands.add_parser("check", parents=[common, framework_args], help="Evaluate metamorphisms.")
        check.add_argument("--pool")
        check.add_argument("--records")

        coverage = commands.add_parser("coverage", parents=[common, framework_args], help="Measure k-way coverage.")
        coverage.add_argument("--pool")
        coverage.add_argument("--k", type=int)
        coverage.add_argument("--distinct-only", action="store_true", default=None)

        stats = commands.add_parser("stats", parents=[common], help="Score tables, summaries and correlation.")
        stats.add_argument("--pool")
        stats.add_argument("--records")
        stats.add_argument("--verdicts")
        stats.add_argument("--pearson", nargs=2, metavar=("A", "B"), help="Correlate two vector files.")
        stats.add_argument("--population-stddev", action="store_true")

        explore = commands.add_parser("explore", parents=[common, framework_args, subject_args],
                                      help="Locate a classification boundary.")
        explore.add_argument("--a", type=float)
        explore.add_argument("--b", type=float)
        explore.add_argument("--epsilon", type=float)
        explore.add_argument("--max-iterations", type=int)

        commands.add_parser("subjects", parents=[common], help="List bundled frameworks and subjects.")
        return parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parses argv, runs the subcommand and maps failures to exit codes.

        Returns:
            int: 0 on success, 1 for failing verdicts under --strict, 2 configuration or
            file errors, 3 limits, 4 subject unavailable, 5 protocol violation, 6 other.
        """
        args = self.parser.parse_args(argv)
        if getattr(args, "verbose", False):
            logging.getLogger().setLevel(logging.DEBUG)
        handler = getattr(self, f"_handle_{args.command_name}")
        try:
            cfg = self._settings(args)
            return handler(args, cfg)
        except ProtocolViolation as e:
            return self._fail(e, EXIT_PROTOCOL)
        except SubjectUnavailable as e:
            return self._fail(e, EXIT_UNAVAILABLE)
        except LimitExceeded as e:
            return self._fail(e, EXIT_LIMIT)
        except CONFIG_ERRORS as e:
            return self._fail(e, EXIT_CONFIG)
        except MorphTestError as e:
            return self._fail(e, EXIT_ENGINE)

    def _fail(self, error: Exception, code: int) -> int:
        logger.error(f"{type(error).__name__}: {error}", exc_info=True)
        print(f"error: {error}", file=sys.stderr)
        return code

    # --- settings ---

    def _settings(self, args: argparse.Namespace) -> RunConfig:
        path = getattr(args, "config", None)
        return load_run_config(path) if path else RunConfig(version=1)

    def _rng_seed(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        seed = _pick(getattr(args, "seed", None), cfg.rng_seed)
        if not 0 <= seed < 2**64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed}")
        return seed

    def _framework_source(self, args: argparse.Namespace, cfg: RunConfig) -> tuple[str, Optional[int], dict[str, Any]]:
        section = cfg.framework
        name = _pick(getattr(args, "framework", None), section.name if section else None)
        if name is None:
            raise ConfigError(f"No framework given; available: {', '.join(self.registry.framework_names())}")
        same = section is not None and section.name == name
        seeds = _pick(getattr(args, "seeds", None), section.seeds if same else None)
        options = dict(section.options) if same else {}
        threshold = getattr(args, "threshold", None)
        if threshold is not None and name == "synth_recognizer":
            options["threshold"] = threshold
        return name, seeds, options

    def _framework(self, args: argparse.Namespace, cfg: RunConfig) -> Framework:
        name, seeds, options = self._framework_source(args, cfg)
        return self.registry.framework(name, seeds, options)

    def _in_process_subject(self, name: str, args: argparse.Namespace, cfg: RunConfig) -> InProcessSubject:
        seeds, options = None, {}
        if getattr(args, "framework", None) is not None or cfg.framework is not None:
            _, seeds, options = self._framework_source(args, cfg)
        if name != "synth_recognizer":
            options = {}
        return self.registry.subject(name, seeds, options)

    def _subject(self, args: argparse.Namespace, cfg: RunConfig) -> Subject:
        section = cfg.subject
        command_line = getattr(args, "subject_command", None)
        command = shlex.split(command_line) if command_line else (section.command if section else None)
        timeout_ms = _pick(getattr(args, "timeout_ms", None), section.timeout_ms if section else 5000)
        if command:
            return ExternalSubject(command[0], tuple(command), timeout_ms, section.max_restarts if section else 2)
        name = _pick(getattr(args, "subject", None), section.name if section else None)
        if name is None:
            raise ConfigError(f"No subject given; available: {', '.join(self.registry.subject_names())}")
        return self._in_process_subject(name, args, cfg)

    def _limits(self, args: argparse.Namespace, gen: GenerateSection) -> GenLimits:
        section = gen.limits
        grid = None
        if section.param_grid:
            grid = {
                name: [MorphParams.of({key: from_tagged_json(value) for key, value in params.items()}) for params in sets]
                for name, sets in section.param_grid.items()
            }
        return GenLimits(
            max_pool_size=_pick(getattr(args, "max_pool_size", None), section.max_pool_size),
            max_depth=_pick(getattr(args, "max_depth", None), section.max_depth),
            param_grid=grid,
            distinct_only=bool(_pick(getattr(args, "distinct_only", None), section.distinct_only)),
        )

    # --- subcommands ---

    def _handle_generate(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        strategy = _pick(args.strategy, cfg.generate.strategy if cfg.generate else None)
        if strategy is None:
            raise ConfigError(f"No strategy given; choose from {', '.join(STRATEGIES)}")
        gen = cfg.generate if cfg.generate is not None else GenerateSection(strategy=strategy)
        fw = self._framework(args, cfg)
        limits = self._limits(args, gen)
        rng_seed = self._rng_seed(args, cfg)
        k = _pick(args.k, gen.k)
        count = _pick(args.count, gen.count)
        ga = gen.ga.model_copy(
            update={
                "population_cap": _pick(args.population, gen.ga.population_cap),
                "generations": _pick(args.generations, gen.ga.generations),
                "fitness": _pick(args.fitness, gen.ga.fitness),
            }
        )
        settings = gen.model_copy(
            update={
                "strategy": strategy,
                "k": k,
                "count": count,
                "ga": ga,
                "limits": gen.limits.model_copy(
                    update={
                        "max_pool_size": limits.max_pool_size,
                        "max_depth": limits.max_depth,
                        "distinct_only": limits.distinct_only,
                    }
                ),
            }
        )
        logger.info(f"Generating with strategy {strategy!r} for framework {fw.name!r}.")

        generator = PoolGenerator(fw, limits)
        if strategy == "exhaustive":
            pool = generator.exhaustive()
        elif strategy == "kway":
            pool = generator.kway(k)
        elif strategy == "random":
            pool = generator.random(count, rng_seed, gen.stop_at_kway)
        else:
            ga_cfg = GaConfig(
                population_cap=ga.population_cap,
                generations=ga.generations,
                tournament_size=ga.tournament_size,
                elitism_count=ga.elitism_count,
                rng_seed=rng_seed,
                fitness=ga.fitness,
                patience=ga.patience,
            )
            subject = None
            if ga_cfg.fitness == "violations":
                subject = self._subject(args, cfg)
                if not isinstance(subject, InProcessSubject):
                    raise ConfigError("Fitness 'violations' needs a bundled in-process subject")
            result = generate_optimal(fw, ga_cfg, subject)
            pool = result.pool
            if result.trace:
                print(f"Best fitness: {result.trace[-1]!r}")

        path = _pick(getattr(args, "out", None), cfg.output.pool or DEFAULT_POOL_PATH)
        config_echo = {**settings.model_dump(mode="json", exclude_none=True), "rng_seed": rng_seed}
        write_file(path, dump_pool(pool, fw.name, strategy=strategy, config=config_echo))
        print(f"Pool size: {len(pool)}")
        print(f"Truncated: {str(pool.truncated).lower()}")
        if strategy == "kway":
            coverage = generator.coverage(pool, k)
            for n, fraction in coverage.per_n.items():
                print(f"Coverage n={n}: {fraction:.4f}")
        return EXIT_OK

    def _handle_run(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        pool = load_pool(read_file(_pick(args.pool, cfg.output.pool or DEFAULT_POOL_PATH)))
        subject = self._subject(args, cfg)
        workers = get_worker_count(_pick(getattr(args, "workers", None), cfg.workers))
        records = execute_pool(subject, pool, workers)
        path = _pick(getattr(args, "out", None), cfg.output.records or DEFAULT_RECORDS_PATH)
        write_file(path, dump_records(records, subject.name))
        for outcome in Outcome:
            print(f"{outcome.value.capitalize()}: {sum(1 for r in records if r.outcome is outcome)}")
        return EXIT_OK

    def _handle_check(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        fw = self._framework(args, cfg)
        pool = load_pool(read_file(_pick(args.pool, cfg.output.pool or DEFAULT_POOL_PATH)))
        records = load_records(read_file(_pick(args.records, cfg.output.records or DEFAULT_RECORDS_PATH)))
        result = MetamorphismChecker(fw).check(pool, records)
        path = _pick(getattr(args, "out", None), cfg.output.verdicts or DEFAULT_VERDICTS_PATH)
        write_file(path, dump_verdicts(result.verdicts))
        for line in result.summary.format_lines():
            print(line)
        rate = result.summary.acceptance_rate()
        print(f"Pass rate: {'-' if rate is None else f'{rate:.4f}'}")
        strict = getattr(args, "strict", False) or cfg.strict
        if strict and result.summary.total(Verdict.FAIL) > 0:
            logger.warning("Failing verdicts present in strict mode.")
            return EXIT_FAILURES
        return EXIT_OK

    def _handle_coverage(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        fw = self._framework(args, cfg)
        pool = load_pool(read_file(_pick(args.pool, cfg.output.pool or DEFAULT_POOL_PATH)))
        gen = cfg.generate
        k = _pick(args.k, gen.k if gen else 1)
        distinct = bool(_pick(args.distinct_only, gen.limits.distinct_only if gen else False))
        coverage = measure_kway_coverage(pool, fw, k, distinct)
        for n, fraction in coverage.per_n.items():
            print(f"Coverage n={n}: {fraction:.4f}")
        print(f"Coverage aggregate: {coverage.aggregate:.4f}")
        return EXIT_OK

    def _handle_stats(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        if args.pearson:
            first, second = args.pearson
            report = pearson(read_vector(first), read_vector(second), (first, second))
            print(f"Pearson r: {report.r:.2f} (n={report.n}, exact {report.r:.6f})")
            if args.pool is None and cfg.output.pool is None:
                return EXIT_OK

        pool = load_pool(read_file(_pick(args.pool, cfg.output.pool or DEFAULT_POOL_PATH)))
        records = load_records(read_file(_pick(args.records, cfg.output.records or DEFAULT_RECORDS_PATH)))
        verdicts_path = _pick(args.verdicts, cfg.output.verdicts)
        verdicts = VerdictSummary.of(load_verdicts(read_file(verdicts_path))) if verdicts_path else None
        table = build_metric_table(pool, records, population_stddev=args.population_stddev)
        summary = summarize(table)
        for line in summary.format_lines():
            print(line)
        out = _pick(getattr(args, "out", None), cfg.output.report)
        if out:
            fmt = _pick(getattr(args, "format", None), cfg.output.format)
            write_report(out, emit_report(table, summary, verdicts, fmt))
        return EXIT_OK

    def _handle_explore(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        if getattr(args, "framework", None) is None and cfg.framework is None:
            args.framework = "classifier"
        fw = self._framework(args, cfg)
        binary = [m for m in fw.datamorphisms if m.arity == 2]
        if not binary:
            raise ConfigError(f"Framework {fw.name!r} has no binary datamorphism to explore with")
        subject = self._subject(args, cfg)
        if not isinstance(subject, InProcessSubject):
            raise ConfigError("Exploration needs a bundled in-process subject")
        section = cfg.explore
        explore_cfg = ExploreConfig(
            epsilon=_pick(args.epsilon, section.epsilon if section else 1e-6),
            max_iterations=_pick(args.max_iterations, section.max_iterations if section else 64),
            distance=section.distance if section else "default",
        )
        a = _pick(args.a, section.a if section else 0.0)
        b = _pick(args.b, section.b if section else 1.0)
        result = explore_boundary(subject, Number(a), Number(b), binary[0], explore_cfg)
        print(f"Iterations: {result.iterations}")
        print(f"Lo: {result.lo.datum!r} -> {result.lo_class!r}")
        print(f"Hi: {result.hi.datum!r} -> {result.hi_class!r}")
        out = getattr(args, "out", None)
        if out:
            echo = {
                "a": a,
                "b": b,
                "epsilon": explore_cfg.epsilon,
                "max_iterations": explore_cfg.max_iterations,
                "distance": explore_cfg.distance,
            }
            write_file(out, dump_pool(result.to_pool(), fw.name, strategy="explore", config=echo))
        return EXIT_OK

    def _handle_subjects(self, args: argparse.Namespace, cfg: RunConfig) -> int:
        print("Frameworks:")
        for name in self.registry.framework_names():
            print(f"  {name}")
        print("Subjects:")
        for name in self.registry.subject_names():
            print(f"  {name}")
        return EXIT_OK
