# app/subjects/registry.py
"""Name lookup for the bundled frameworks and subjects, as used on the command line."""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

from app.errors import ConfigError, FrameworkError
from app.models.datum import Datum
from app.models.framework import Framework
from app.models.records import InProcessSubject
from app.subjects.bitset import bitset_framework
from app.subjects.classifier import classifier_framework, threshold_classifier
from app.subjects.recognizer import RecognizerOptions, synthetic_recognizer
from app.subjects.sine import DEFAULT_SEED_COUNT, sine_correct, sine_faulty, sine_framework

logger = logging.getLogger(__name__)

Options = Mapping[str, Any]
FrameworkFactory = Callable[[Optional[int], Options], Framework]
SubjectFactory = Callable[[Optional[int], Options], InProcessSubject]

CLASSIFIER_PREFIX = "classifier:"


def _recognizer_options(seeds: Optional[int], options: Options) -> RecognizerOptions:
    known = {"rng_seed", "delta", "error_fraction", "threshold"}
    unknown = sorted(set(options) - known)
    if unknown:
        raise ConfigError(f"synth_recognizer has no options named {unknown}")
    values = {name: options[name] for name in known if name in options}
    if seeds is not None:
        values["seeds"] = seeds
    return RecognizerOptions(**values)


def _sine(seeds: Optional[int], options: Options) -> Framework:
    return sine_framework(seeds or DEFAULT_SEED_COUNT, options.get("values"), options.get("tolerance", 1e-9))


def _classifier(seeds: Optional[int], options: Options) -> Framework:
    return classifier_framework(options.get("values", (0.0, 1.0)))


def _bitset(seeds: Optional[int], options: Options) -> Framework:
    return bitset_framework(options.get("width", 3), options.get("morphisms"), options.get("seeds"))


def _recognizer(seeds: Optional[int], options: Options) -> Framework:
    return synthetic_recognizer(_recognizer_options(seeds, options))[1]


def _identity(datum: Datum) -> Datum:
    return datum


@dataclass
class SubjectRegistry:
    """
    Bundled frameworks and in-process subjects by stable name.

    "classifier:<t>" names a threshold classifier for any finite t. The synth_recognizer
    subject is rebuilt from the framework options it is given so that its identities
    match the framework's seeds.
    """

    frameworks: dict[str, FrameworkFactory] = field(default_factory=dict)
    subjects: dict[str, SubjectFactory] = field(default_factory=dict)

    @classmethod
    def bundled(cls) -> "SubjectRegistry":
        registry = cls()
        registry.register_framework("sine", _sine)
        registry.register_framework("classifier", _classifier)
        registry.register_framework("bitset", _bitset)
        registry.register_framework("synth_recognizer", _recognizer)
        registry.register_subject("sine_correct", lambda seeds, options: sine_correct())
        registry.register_subject("sine_faulty", lambda seeds, options: sine_faulty())
        registry.register_subject(
            "synth_recognizer", lambda seeds, options: synthetic_recognizer(_recognizer_options(seeds, options))[0]
        )
        registry.register_subject("echo", lambda seeds, options: InProcessSubject("echo", _identity))
        return registry

    def register_framework(self, name: str, factory: FrameworkFactory) -> None:
        if name in self.frameworks:
            raise FrameworkError(f"Framework {name!r} is already registered")
        self.frameworks[name] = factory

    def register_subject(self, name: str, factory: SubjectFactory) -> None:
        if name in self.subjects or name.startswith(CLASSIFIER_PREFIX):
            raise FrameworkError(f"Subject name {name!r} is taken")
        self.subjects[name] = factory

    def framework(self, name: str, seeds: Optional[int] = None, options: Optional[Options] = None) -> Framework:
        """
        Instantiates a bundled framework.

        Raises:
            ConfigError: If the name is unknown or the options are invalid.
        """
        factory = self.frameworks.get(name)
        if factory is None:
            raise ConfigError(f"Unknown framework {name!r}; available: {', '.join(self.framework_names())}")
        try:
            framework = factory(seeds, dict(options or {}))
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid options for framework {name!r}: {e}") from e
        logger.info(f"Framework {name!r} built with {len(framework.seeds)} seeds.")
        return framework

    def subject(self, name: str, seeds: Optional[int] = None, options: Optional[Options] = None) -> InProcessSubject:
        if name.startswith(CLASSIFIER_PREFIX):
            try:
                threshold = float(name[len(CLASSIFIER_PREFIX):])
            except ValueError:
                raise ConfigError(f"Classifier subject needs a numeric threshold, got {name!r}") from None
            return threshold_classifier(threshold)
        factory = self.subjects.get(name)
        if factory is None:
            raise ConfigError(f"Unknown subject {name!r}; available: {', '.join(self.subject_names())}")
        return factory(seeds, dict(options or {}))

    def framework_names(self) -> list[str]:
        return sorted(self.frameworks)

    def subject_names(self) -> list[str]:
        return sorted([*self.subjects, f"{CLASSIFIER_PREFIX}<t>"])
