import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tashkeel.codec import Vocabulary


@pytest.fixture
def small_vocab() -> Vocabulary:
    return Vocabulary(list("ءابتثجحخدذكلم ."), with_sentence_marks=False)


@pytest.fixture
def rnn_vocab() -> Vocabulary:
    return Vocabulary(list("ءابتثجحخدذكلم ."), with_sentence_marks=True)
