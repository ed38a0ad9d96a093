"""
This module performs some integration tests by
using a seperate filters.txt file. Each line is
treated as a filter and is evaluated against a
predefined jet document, alone and as part of a
filter set.
"""
import os
import os.path
from wavekac.predicate import FilterSet, JetFilter
from .. import DOC


def read_filters():
    p = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(p, "filters.txt")) as fh:
        return [line.strip() for line in fh if line.strip()]


def test_samples():
    for line, text in enumerate(read_filters()):
        obj = JetFilter(text)
        if not obj.is_valid():
            print("Invalid Filter!")
            print("Line: ", line)
            print("Filter: ", text)
            print("Errors: ", "\n".join(obj.errors()))
            assert False

        res, ctx = obj.analyze(DOC)
        if not text.endswith("true") and not text.endswith("false"):
            print("Line: ", line)
            print("Unknown result!")
            print("Filter: ", text)
            assert False

        if (text.endswith("true") and not res) or (text.endswith("false") and res):
            print("Line: ", line)
            print("Filter: ", text)
            print("Failures: ", "\n".join(ctx.failed))
            assert False


def test_set():
    texts = read_filters()
    s = FilterSet(texts)
    assert len(s) == len(texts)

    match = sorted(f.text for f in s.evaluate(DOC))
    expected = sorted(t for t in texts if t.endswith("true"))
    assert match == expected
