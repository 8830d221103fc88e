"""
Per-epoch training history, appended to a CSV file as the run progresses.

.. moduleauthor:: PySatNet developers
"""

import csv
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import pandas as pd

FIELDNAMES = ['epoch', 'train_loss', 'train_acc', 'val_loss', 'val_acc', 'lr', 'alpha_mean', 'alpha_per_block']


@dataclass
class EpochRecord:
    epoch: int
    trainLoss: float
    trainAccuracy: float
    valLoss: float
    valAccuracy: float
    lr: float
    alphas: List[float] = field(default_factory=list)

    def alphaMean(self) -> Optional[float]:
        return sum(self.alphas) / len(self.alphas) if self.alphas else None

    def toRow(self) -> Dict:
        alphaMean = self.alphaMean()
        return {
            'epoch': self.epoch,
            'train_loss': f"{self.trainLoss:.6f}",
            'train_acc': f"{self.trainAccuracy:.6f}",
            'val_loss': f"{self.valLoss:.6f}",
            'val_acc': f"{self.valAccuracy:.6f}",
            'lr': f"{self.lr:.6e}",
            'alpha_mean': '' if alphaMean is None else f"{alphaMean:.6f}",
            'alpha_per_block': ';'.join(f"{a:.6f}" for a in self.alphas),
        }


class HistoryTracker:
    """Keeps the records in memory and, with a filename, appends each one as a CSV row."""

    def __init__(self, filename: Optional[str] = None):
        self.filename = filename
        self.records: List[EpochRecord] = []

    def record(self, record: EpochRecord):
        self.records.append(record)
        if self.filename is not None:
            self._writeToFile(record.toRow())

    def getRecords(self) -> List[EpochRecord]:
        return list(self.records)

    def bestRecord(self) -> Optional[EpochRecord]:
        # first epoch reaching the maximum validation accuracy
        best = None
        for record in self.records:
            if best is None or record.valAccuracy > best.valAccuracy:
                best = record
        return best

    def toDataFrame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.records])

    def _writeToFile(self, row: Dict):
        with open(self.filename, 'a', newline='') as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=FIELDNAMES)
            if csvfile.tell() == 0:
                writer.writeheader()
            writer.writerow(row)


def readHistory(filename: str) -> pd.DataFrame:
    return pd.read_csv(filename, keep_default_na=False, dtype={'alpha_mean': str, 'alpha_per_block': str})
