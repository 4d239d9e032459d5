import sys

import pytest

from stancetree.conversation import RawAnnotation, StanceLabel, Tweet

S, D, Q, C = StanceLabel

THREAD = [
    ("u1", None, "These are not timid colours; soldiers back guarding Tomb of Unknown Soldier "
                 "after today's shooting #StandforCanada --PICTURE--", S,
     RawAnnotation.SOURCE_SUPPORTING),
    ("u2", "u1", "@u1 Apparently a hoax. Best to take Tweet down.", D, RawAnnotation.DISAGREED),
    ("u3", "u1", "@u1 This photo was taken this morning, before the shooting.", D,
     RawAnnotation.DISAGREED),
    ("u4", "u1", "@u1 I don't believe there are soldiers guarding this area right now.", D,
     RawAnnotation.DISAGREED),
    ("u5", "u4", "@u4 wondered as well. I've reached out to someone who would know just to "
                 "confirm that. Hopefully get response soon.", C, RawAnnotation.COMMENT),
    ("u6", "u5", "@u5 ok, thanks.", C, RawAnnotation.COMMENT),
]


def thread_tweets(with_labels=True, with_raw=False, event="ottawashooting"):
    return [
        Tweet(id=i, text=text, parent_id=p, event=event,
              gold_label=lab if with_labels else None,
              raw_annotation=raw if with_raw else None,
              has_picture_metadata=True if i == "u1" else None)
        for i, p, text, lab, raw in THREAD
    ]


@pytest.fixture
def thread():
    return thread_tweets()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
