import functools
import logging
import os
import sys

import click
import yaml

from pysatnet.analyzers.report import EvalReport, evaluate, readReport, writeReportFiles
from pysatnet.core import (CheckpointError, ConfigError, ContractError, DataError, DimensionError, NumericalError,
                           SplitName)
from pysatnet.core.constants import (CHECKPOINT_FILE, CONFIG_FILE, MANIFEST_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE,
                                     RUN_LOG_FILE)
from pysatnet.datasets import LabeledDataset, SplitSpec
from pysatnet.datasets.directory import loadDirectory
from pysatnet.datasets.split import splitIndices, writeSplitManifest
from pysatnet.datasets.synthetic import synthGenerate, writeImageFolder
from pysatnet.models import build
from pysatnet.models.checkpoint import readCheckpoint
from pysatnet.training.trainer import TrainResult, train as runTraining
from pysatnet.utils import rng as rngStreams
from pysatnet.utils.config import RunConfig, writeResolvedConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

# settings a training run records that eval reuses next to its checkpoint
DATA_KEYS = ('data', 'synthetic', 'synthPerClass', 'imageSize', 'seed', 'cachePath', 'workers', 'widthDivisor')

FORMATTER = logging.Formatter(
    "[%(levelname)s]|[%(asctime)s]|[%(process)d::%(thread)d]|[%(name)s::%(module)s::%(funcName)s::%(lineno)d]|=> "
    "%(message)s"
)


def exitCodes(func):
    """Maps library errors onto the documented process exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except CheckpointError as e:
            logger.error(f"Checkpoint error: {e}")
            click.echo(f"Error: {e}", err=True)
            if e.expectedDigest is not None or e.actualDigest is not None:
                click.echo(f"  expected spec digest: {e.expectedDigest}", err=True)
                click.echo(f"  stored spec digest:   {e.actualDigest}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (ConfigError, ContractError, DimensionError) as e:
            logger.error(f"Configuration error: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (DataError, OSError) as e:
            logger.error(f"Data error: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_DATA)
        except NumericalError as e:
            logger.error(f"Numerical abort: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_NUMERICAL)

    return wrapper


class RunLog(object):
    """Attaches ``run.log`` inside the output directory to the package logger for one command."""

    def __init__(self, outDir: str):
        self.__outDir = outDir
        self.__handler = None

    def __enter__(self):
        os.makedirs(self.__outDir, exist_ok=True)
        self.__handler = logging.FileHandler(os.path.join(self.__outDir, RUN_LOG_FILE))
        self.__handler.setLevel(logging.INFO)
        self.__handler.setFormatter(FORMATTER)
        packageLogger = logging.getLogger('pysatnet')
        packageLogger.addHandler(self.__handler)
        if packageLogger.getEffectiveLevel() > logging.INFO:
            packageLogger.setLevel(logging.INFO)
        return self

    def __exit__(self, excType, excValue, tb):
        logging.getLogger('pysatnet').removeHandler(self.__handler)
        self.__handler.close()
        return False


def resolveRun(ctx, command: str, base=None, **flags) -> RunConfig:
    return RunConfig.fromYamlFile(ctx.obj['configFile'], command, base, seed=ctx.obj['seed'], out=ctx.obj['out'],
                                  **flags)


def loadDataset(run: RunConfig) -> LabeledDataset:
    if run.synthetic:
        return synthGenerate(run.synthPerClass, run.seed, run.imageSize)
    if run.data is None:
        raise ConfigError(f"{run.command} needs a dataset: pass --data <root> or --synthetic")
    return loadDirectory(run.data, run.imageSize, run.workers, run.cachePath)


def trainingRunSettings(checkpointPath: str) -> dict:
    """Dataset settings of the run that produced ``checkpointPath``, when its config.yaml sits beside it."""
    path = os.path.join(os.path.dirname(os.path.abspath(checkpointPath)), CONFIG_FILE)
    if not os.path.isfile(path):
        return {}
    with open(path) as f:
        recorded = (yaml.safe_load(f) or {}).get('train') or {}
    return {key: recorded[key] for key in DATA_KEYS if recorded.get(key) is not None}


def trainRun(run: RunConfig) -> TrainResult:
    """Echoes the config, splits, writes the manifest and trains; artifacts land in ``run.out``."""
    trainConfig = run.trainConfig()
    writeResolvedConfig(run.out, run, trainConfig)

    with RunLog(run.out):
        logger.info(f"Training {run.getVariant()} (preset {run.preset or run.getVariant()}) into <{run.out}>")
        dataset = loadDataset(run)
        trainIdx, valIdx, testIdx = splitIndices(dataset.getLabels(), SplitSpec(seed=run.seed))
        writeSplitManifest(os.path.join(run.out, MANIFEST_FILE), dataset,
                           {SplitName.TRAIN: trainIdx, SplitName.VAL: valIdx, SplitName.TEST: testIdx})
        logger.info(f"Split {len(dataset)} samples into {trainIdx.size}/{valIdx.size}/{testIdx.size}")

        model = build(run.modelSpec(dataset.getNumClasses()), rngStreams.streamFor(run.seed, rngStreams.INIT))
        return runTraining(model, (dataset.subset(trainIdx), dataset.subset(valIdx)), trainConfig, run.out)


def evalRun(run: RunConfig, checkpointPath: str) -> EvalReport:
    writeResolvedConfig(run.out, run)

    with RunLog(run.out):
        dataset = loadDataset(run)
        expectedSpec = run.modelSpec(dataset.getNumClasses()) if run.variant is not None else None
        ckpt = readCheckpoint(checkpointPath, expectedSpec)
        logger.info(f"Loaded <{checkpointPath}>: {ckpt.spec.variant}, epoch {ckpt.epoch}, "
                    f"best val accuracy {ckpt.bestValAccuracy:.4f}")
        if ckpt.spec.numClasses != dataset.getNumClasses():
            raise ConfigError(f"Checkpoint predicts {ckpt.spec.numClasses} classes, "
                              f"dataset has {dataset.getNumClasses()}")

        if run.evalSplit != 'all':
            indices = dict(zip(('train', 'val', 'test'), splitIndices(dataset.getLabels(), SplitSpec(seed=run.seed))))
            dataset = dataset.subset(indices[run.evalSplit])
        logger.info(f"Evaluating the {run.evalSplit} split ({len(dataset)} samples)")

        report = evaluate(ckpt.restore(), dataset, run.batchSize or 64, run.topN)
        writeReportFiles(report, run.out)
        return report


@click.group()
@click.option('--config', 'configFile', type=click.Path(exists=True, dir_okay=False), default=None,
              help='YAML file with common/train/eval/synth/report sections')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='Run seed (default 42)')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory')
@click.pass_context
def cli(ctx, configFile, seed, out):
    ctx.obj = {'configFile': configFile, 'seed': seed, 'out': out}


@cli.command(name='train', help='Train a model and keep the best validation checkpoint')
@click.option('--data', type=click.Path(), default=None, help='Class-per-directory image root')
@click.option('--synthetic', is_flag=True, help='Train on the generated four-class set')
@click.option('--synthetic-per-class', 'synthPerClass', type=click.IntRange(min=1), default=None)
@click.option('--variant', type=click.Choice(['baseline', 'cbam7', 'balanced12']), default=None)
@click.option('--preset', type=click.Choice(['baseline', 'cbam7', 'balanced12']), default=None)
@click.option('--epochs', type=click.IntRange(min=1), default=None)
@click.option('--batch-size', 'batchSize', type=click.IntRange(min=1), default=None)
@click.option('--lr', type=float, default=None)
@click.option('--weight-decay', 'weightDecay', type=float, default=None)
@click.option('--early-stop', 'earlyStopPatience', type=click.IntRange(min=1), default=None)
@click.option('--width-divisor', 'widthDivisor', type=click.IntRange(min=1), default=None)
@click.option('--image-size', 'imageSize', type=click.IntRange(min=8), default=None)
@click.option('--cache', 'cachePath', type=click.Path(dir_okay=False), default=None)
@click.option('--workers', type=click.IntRange(min=1), default=None)
@click.option('--no-augment', 'noAugment', is_flag=True, help='Normalize only; no random augmentation')
@click.pass_context
@exitCodes
def trainCommand(ctx, data, synthetic, synthPerClass, variant, preset, epochs, batchSize, lr, weightDecay,
                 earlyStopPatience, widthDivisor, imageSize, cachePath, workers, noAugment):
    run = resolveRun(ctx, 'train', data=data, synthetic=True if synthetic else None, synthPerClass=synthPerClass,
                     variant=variant, preset=preset, epochs=epochs, batchSize=batchSize, lr=lr,
                     weightDecay=weightDecay, earlyStopPatience=earlyStopPatience, widthDivisor=widthDivisor,
                     imageSize=imageSize, cachePath=cachePath, workers=workers,
                     augment=False if noAugment else None)
    result = trainRun(run)
    click.echo(f"Best validation accuracy {result.bestCheckpoint.bestValAccuracy:.4f} at epoch {result.bestEpoch} "
               f"({len(result.history)} epochs{', stopped early' if result.stoppedEarly else ''})")
    click.echo(f"Checkpoint: {os.path.join(run.out, CHECKPOINT_FILE)}")
    return EXIT_OK


@cli.command(name='eval', help='Evaluate a checkpoint and write the report files')
@click.option('--checkpoint', type=click.Path(dir_okay=False), default=None,
              help='Checkpoint file (default <out>/best.ckpt)')
@click.option('--data', type=click.Path(), default=None)
@click.option('--synthetic', is_flag=True)
@click.option('--synthetic-per-class', 'synthPerClass', type=click.IntRange(min=1), default=None)
@click.option('--variant', type=click.Choice(['baseline', 'cbam7', 'balanced12']), default=None,
              help='Require the checkpoint to hold this architecture')
@click.option('--width-divisor', 'widthDivisor', type=click.IntRange(min=1), default=None)
@click.option('--split', 'evalSplit', type=click.Choice(['train', 'val', 'test', 'all']), default=None)
@click.option('--top-n', 'topN', type=click.IntRange(min=1), default=None)
@click.option('--batch-size', 'batchSize', type=click.IntRange(min=1), default=None)
@click.option('--cache', 'cachePath', type=click.Path(dir_okay=False), default=None)
@click.pass_context
@exitCodes
def evalCommand(ctx, checkpoint, data, synthetic, synthPerClass, variant, widthDivisor, evalSplit, topN, batchSize,
                cachePath):
    flags = dict(checkpoint=checkpoint, data=data, synthetic=True if synthetic else None,
                 synthPerClass=synthPerClass, variant=variant, widthDivisor=widthDivisor, evalSplit=evalSplit,
                 topN=topN, batchSize=batchSize, cachePath=cachePath)
    run = resolveRun(ctx, 'eval', **flags)
    checkpointPath = run.checkpoint or os.path.join(run.out, CHECKPOINT_FILE)
    base = trainingRunSettings(checkpointPath)
    if data is not None:
        base.pop('synthetic', None)
    run = resolveRun(ctx, 'eval', base=base, **flags)
    report = evalRun(run, checkpointPath)
    click.echo(report.toText(), nl=False)
    return EXIT_OK


@cli.command(name='synth', help='Write the synthetic four-class set as class-per-directory PNG files')
@click.option('--n', type=click.IntRange(min=1), default=None, help='Images per class')
@click.option('--image-size', 'imageSize', type=click.IntRange(min=8), default=None)
@click.pass_context
@exitCodes
def synthCommand(ctx, n, imageSize):
    run = resolveRun(ctx, 'synth', n=n, imageSize=imageSize)
    writeResolvedConfig(run.out, run)
    with RunLog(run.out):
        count = writeImageFolder(synthGenerate(run.n, run.seed, run.imageSize), run.out)
        click.echo(f"Wrote {count} images under {run.out}")
    return EXIT_OK


@cli.command(name='report', help='Render a structured report.json as text')
@click.option('--report', 'report', type=click.Path(dir_okay=False), default=None,
              help='Report file (default <out>/report.json)')
@click.option('--write', is_flag=True, help='Also write report.txt next to the report file')
@click.pass_context
@exitCodes
def reportCommand(ctx, report, write):
    run = resolveRun(ctx, 'report', report=report)
    path = run.report or os.path.join(run.out, REPORT_JSON_FILE)
    if not os.path.isfile(path):
        raise DataError(f"No report at <{path}>")
    text = readReport(path).toText()
    if write:
        with open(os.path.join(os.path.dirname(os.path.abspath(path)), REPORT_TEXT_FILE), 'w') as f:
            f.write(text)
    click.echo(text, nl=False)
    return EXIT_OK


def CliMain():
    logger = logging.getLogger('pysatnet')
    logger.setLevel(logging.INFO)

    fileHandler = logging.FileHandler('PySatNet.log')
    fileHandler.setLevel(logging.INFO)
    fileHandler.setFormatter(FORMATTER)

    consoleHandler = logging.StreamHandler()
    consoleHandler.setLevel(logging.INFO)
    consoleHandler.setFormatter(FORMATTER)

    logger.addHandler(fileHandler)
    logger.addHandler(consoleHandler)

    try:
        code = cli(standalone_mode=False)
    except click.UsageError as e:
        click.echo(f'Error: {str(e)}')
        click.echo(cli.get_help(click.Context(cli)))
        code = EXIT_CONFIG
    except click.Abort:
        code = EXIT_CONFIG
    sys.exit(code if isinstance(code, int) else EXIT_OK)


if __name__ == "__main__":
    CliMain()
