import os

from dotenv import load_dotenv

load_dotenv()

PROJECT_NAME: str = 'dense-ensemble'
VERSION: str = '0.1.0'

LOG_LEVEL: str = os.getenv('DENSE_ENSEMBLE_LOG_LEVEL', 'INFO')
OUTPUT_DIR: str = os.getenv('DENSE_ENSEMBLE_OUTPUT_DIR', 'runs')
DATA_DIR: str = os.getenv('DENSE_ENSEMBLE_DATA_DIR', 'data/synthetic')
WORKERS: int = int(os.getenv('DENSE_ENSEMBLE_WORKERS', '1'))
