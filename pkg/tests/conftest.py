import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from popmetrics.chart import SongHistory
from popmetrics.dsp import AudioClip

import helpers


@pytest.fixture
def tone_clip():
    """Integer-Hz tones are 1 s periodic: analysis segments repeat exactly."""

    def make(freq=440.0, seconds=5.0, rate=helpers.RATE, amp=0.3):
        return AudioClip(rate, helpers.sine(freq, seconds, rate=rate, amp=amp))

    return make


@pytest.fixture
def silence_clip():
    def make(seconds=5.0, rate=helpers.RATE):
        return AudioClip(rate, np.zeros(int(round(seconds * rate))))

    return make


@pytest.fixture
def history():
    def make(scores, song_id="s", start=date(2013, 1, 5), max_rank=100):
        weeks = [start + timedelta(weeks=i) for i in range(len(scores))]
        return SongHistory(song_id, weeks, np.array(scores), max_rank)

    return make
