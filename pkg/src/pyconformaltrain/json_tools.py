"""JSON Tools."""
import dataclasses
import datetime
import enum
import json
import pathlib

import numpy as np
import pandas as pd


class CustomJSONEncoder(json.JSONEncoder):
    """JSON encoder for the values that show up in log records and run configs."""

    def default(self, o):
        """Default."""
        if isinstance(o, enum.Enum):
            return o.value
        elif isinstance(o, (datetime.datetime, datetime.date)):
            return o.isoformat()
        elif isinstance(o, pathlib.PurePath):
            return str(o)
        elif isinstance(o, (set, frozenset)):
            return sorted(o)
        elif isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        elif isinstance(o, np.ndarray):
            return o.tolist()
        elif isinstance(o, pd.DataFrame):
            return o.to_dict(orient="records")
        elif dataclasses.is_dataclass(o) and not isinstance(o, type):
            return dataclasses.asdict(o)
        return super().default(o)
