"""Object-style entry point wrapping dataset -> bank -> features."""
from __future__ import annotations

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ValidationError
from .lawcore import make_configs
from .model import load_model, save_model, train_bank
from .transform import (
    FeatureTable,
    canonical_mode,
    parse_methods,
    transform_instance,
    transform_set,
    write_features,
)


def _to_numpy(x):
    if x is None:
        return None
    if hasattr(x, "detach"):  # torch tensors
        x = x.detach().cpu().numpy()
    return x if isinstance(x, (list, tuple)) else np.asarray(x)


class ALT:
    """Adaptive law-based transformation.

    Parameters
    ----------
    train_set : array (instances, channels, time) or (instances, time)
        Series the shapelets are learned from.
    train_classes : array of labels
    train_length : optional per-instance lengths for unequal-length data
    R, L, K : int or list
        Window length, embedding dimension and window shift. Lists must share
        one length; scalars apply to every entry. ``R=None`` uses ``2L - 1``.
    threads : worker threads for training and transformation
    """

    def __init__(self, train_set=None, train_classes=None, train_length=None, R=None, L=5, K=1, threads=1):
        self.configs = make_configs(R, L, K)
        self.threads = threads
        self.bank = None
        self._data = None
        if train_set is not None:
            if train_classes is None:
                raise ValidationError("train_classes is required with train_set")
            self._data = TimeSeriesDataset.from_arrays(
                _to_numpy(train_set), _to_numpy(train_classes), lengths=_to_numpy(train_length)
            )

    def train(self, cleanup=False):
        if self._data is None:
            raise ValidationError("no training data (model was loaded or cleaned up)")
        self.bank = train_bank(self._data, range(self._data.num_instances), self.configs, threads=self.threads)
        if cleanup:
            self._data = None
        return self

    def _require_bank(self):
        if self.bank is None:
            raise ValidationError("model is not trained")
        return self.bank

    def save(self, save_file_name):
        save_model(self._require_bank(), save_file_name)

    @classmethod
    def load(cls, load_file_name, threads=1):
        bank = load_model(load_file_name)
        obj = cls.__new__(cls)
        obj.configs = list(bank.configs)
        obj.threads = threads
        obj.bank = bank
        obj._data = None
        return obj

    def transform(self, z, extr_methods):
        return transform_instance(_to_numpy(z), self._require_bank(), parse_methods(extr_methods))

    def transform_set(
        self,
        test_set,
        extr_methods,
        test_length=None,
        save_file_name=None,
        save_file_mode=None,
        test_classes=None,
    ) -> np.ndarray:
        if (save_file_name is None) != (save_file_mode is None):
            raise ValidationError("save_file_name and save_file_mode must be given together")
        labels = None
        if test_classes is not None:
            labels = [str(v.item() if hasattr(v, "item") else v) for v in np.asarray(_to_numpy(test_classes)).reshape(-1)]
        table: FeatureTable = transform_set(
            _to_numpy(test_set),
            self._require_bank(),
            parse_methods(extr_methods),
            lengths=_to_numpy(test_length),
            labels=labels,
            threads=self.threads,
        )
        if save_file_name is not None:
            write_features(table, save_file_name, canonical_mode(save_file_mode), include_class=labels is not None)
        return table.values
