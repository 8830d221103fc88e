"""defining constants"""

EUROSAT_CLASSES = [
    "AnnualCrop",
    "Forest",
    "HerbaceousVegetation",
    "Highway",
    "Industrial",
    "Pasture",
    "PermanentCrop",
    "Residential",
    "River",
    "SeaLake",
]

IMAGE_SIZE = 64
IMAGE_CHANNELS = 3
IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.tif', '.tiff', '.bmp')

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_SEED = 42
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1

CHECKPOINT_MAGIC = b"PSNCKPT1"
CHECKPOINT_FORMAT_VERSION = 1

HISTORY_FILE = "history.csv"
CHECKPOINT_FILE = "best.ckpt"
MANIFEST_FILE = "split_manifest.tsv"
CONFIG_FILE = "config.yaml"
REPORT_JSON_FILE = "report.json"
REPORT_TEXT_FILE = "report.txt"
CONFUSION_FILE = "confusion.csv"
TOP_CONFUSIONS_FILE = "top_confusions.csv"
ALPHAS_FILE = "alphas.csv"
NAN_DUMP_FILE = "nan_dump.json"
RUN_LOG_FILE = "run.log"
