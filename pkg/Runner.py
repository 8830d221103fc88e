import logging
import os
import traceback

import click
import yaml
from tabulate import tabulate

from pysatnet.core import PySatNetError
from pysatnet.core.constants import CHECKPOINT_FILE
from pysatnet.cli import evalRun, trainRun
from pysatnet.utils.config import RunConfig
import log_setup  # noqa

logger = logging.getLogger(__file__)


def runExperiment(name, details, config):
    out = os.path.join(config.get('Out', 'runs/reproduction'), name)
    common = dict(data=config['Data'], cachePath=config.get('Cache'), seed=config.get('Seed', 42), out=out,
                  variant=details['Variant'])
    trainRun(RunConfig(command='train', preset=details.get('Preset'), **common))
    return evalRun(RunConfig(command='eval', evalSplit='test', **common), os.path.join(out, CHECKPOINT_FILE))


def compare(name, report, reference):
    measured = {
        'accuracy': report.accuracy,
        'kappa': report.kappa,
        'alphaMean': report.alphaMean,
        'confidenceGap': report.confidenceGap,
    }
    rows = []
    for key, target in reference.items():
        value = measured.get(key)
        rows.append([name, key, target, 'n/a' if value is None else f"{value:.4f}",
                     'n/a' if value is None else f"{value - target:+.4f}"])
    return rows


@click.command()
@click.option('--experiments', 'experimentsFile', default='experiments.yaml', type=click.Path(exists=True),
              help='Experiment definitions')
@click.option('--only', multiple=True, help='Run only the named experiments')
def main(experimentsFile, only):
    with open(experimentsFile, 'r') as file:
        config = yaml.safe_load(file)

    rows = []
    for name, details in config['Experiments'].items():
        if only and name not in only:
            continue
        try:
            logger.info(f"Starting experiment <{name}>")
            report = runExperiment(name, details, config)
            rows += compare(name, report, details.get('Reference') or {})
        except PySatNetError as e:
            logger.error(f'Experiment <{name}> failed. Error: {e}')
        except Exception as e:
            logger.exception(f'Error occurred while running experiment <{name}>. Exception: {e}')
            logger.exception(traceback.format_exc())

    if rows:
        logger.info("\n" + tabulate(rows, headers=["Experiment", "Metric", "Reference", "Measured", "Delta"],
                                    tablefmt="simple"))


if __name__ == "__main__":
    main()
