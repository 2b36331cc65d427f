import pytest

from hyposcore.dataset import load_corpus, sample_corpus_path
from hyposcore.pinyin import default_lexicon

# Two worked cases: reference, N-best list and fine-tuned model outputs, each with its published CER%.
CASE1_REF = "一线楼市成交量激增"
CASE1_NBEST = [
    ("一线楼市成交量基增", 11.11),
    ("一线楼市成交量机增", 11.11),
    ("一线楼市成交量积增", 11.11),
    ("一线楼市成交量基僧", 22.22),
    ("一线楼市成交量基升", 22.22),
]
CASE1_FINETUNE = [
    ("一线楼市成交量继续保持", 44.44),
    ("一线楼市成交量激增", 0.00),
    ("一线楼市成交量激增", 0.00),
    ("一线楼市成交量即增", 11.11),
]
CASE2_REF = "当你面对马凝视时马则不愿前行"
CASE2_NBEST = [
    ("但念面对马宁事实马则不愿意牵行", 50.00),
    ("但你面对马宁事实马则不愿意牵行", 42.86),
    ("当年面对马宁事实马则不愿意牵行", 42.86),
    ("但念面对马宁事实马则不愿意谦行", 50.00),
    ("但你面对马宁事实马则不愿意谦行", 42.86),
]
CASE2_FINETUNE = [
    ("但面对马宁实事求是地回答了问题", 92.86),
    ("但面对马宁试马则不愿意前进一步", 64.29),
    ("但面对马赛时马则不愿意前进一步", 57.14),
    ("但面对马宁失事马则不愿意签新", 57.14),
]


@pytest.fixture(scope="session")
def lex():
    return default_lexicon()


@pytest.fixture(scope="session")
def sample_records():
    return load_corpus(sample_corpus_path())


@pytest.fixture
def case1(sample_records):
    return next(r for r in sample_records if r.id == "aishell1-case1")


@pytest.fixture
def case2(sample_records):
    return next(r for r in sample_records if r.id == "kespeech-case2")
