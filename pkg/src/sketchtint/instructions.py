"""Compile edited captions into color instructions.

The correspondence problem is solved by construction: the captioner
knows which instances each sentence describes, so compiling a user
edit is (1) aligning edited sentences to original ones and (2) walking
a small color grammar over each aligned pair. No attention, no
learned grounding.

Binding rules, in precedence order within a sentence:

* a lexicon color immediately before one of the sentence's own
  category-slot tokens binds the color to the sentence's instances
* ``<noun> is/are <color>`` binds likewise (teaser-style phrasing)
* ``with <color> <part-noun>`` binds a part color
* a color before a category word the sentence merely references (an
  anchor like "in front of the house") is a structured error, since
  that sentence does not own those instances

Sentences that align to no original are checked for sky / land /
background components; anything else lands in the unmatched report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .captioner import (
    POSITION_PHRASES,
    QUANTITY_WORDS,
    RELATION_PHRASES,
    Caption,
    surface_forms,
)
from .core import DEFAULT_CATEGORIES

BACKGROUND_COMPONENTS = ("sky", "land", "background")

# words the captioner's own templates may contribute to an edited
# sentence; anything outside these, the original sentence, the lexicon
# and the category forms is out of grammar
_STRUCTURAL = (
    {"the", "a", "an", "and", "there", "is", "are", "it", "with", "day", "night"}
    | set(QUANTITY_WORDS)
    | {w for phrase in POSITION_PHRASES.values() for w in phrase.split()}
    | {w for phrase in RELATION_PHRASES for w in phrase.split()}
    | set(BACKGROUND_COMPONENTS)
)


class CompileError(ValueError):
    """Base of all structured compilation errors."""

    code = "compile_error"

    def __init__(self, message, sentence=None, token=None, span=None):
        super().__init__(message)
        self.sentence = sentence
        self.token = token
        self.span = span

    def to_json(self):
        out = {"code": self.code, "message": str(self)}
        if self.sentence is not None:
            out["sentence"] = self.sentence
        if self.token is not None:
            out["token"] = self.token
        if self.span is not None:
            out["span"] = list(self.span)
        return out


class GrammarError(CompileError):
    code = "grammar_error"


class UnknownColor(GrammarError):
    code = "unknown_color"


class AmbiguousAlignment(CompileError):
    code = "ambiguous_alignment"


# ---------------------------------------------------------------------------
# lexicon

@dataclass
class ColorLexicon:
    """Color phrases with reference sRGB triples scaled to [-1, 1]."""

    entries: list  # (phrase, (r, g, b))

    def __post_init__(self):
        self._ref = {}
        for phrase, rgb in self.entries:
            key = phrase.lower()
            if key in self._ref:
                raise ValueError(f"duplicate color phrase {phrase!r}")
            self._ref[key] = tuple(float(v) for v in rgb)
        self.max_words = max(len(p.split()) for p in self._ref)
        self._words = {w for p in self._ref for w in p.split()}

    def phrases(self):
        return list(self._ref)

    def __contains__(self, phrase) -> bool:
        return phrase.lower() in self._ref

    def reference(self, phrase):
        return self._ref[phrase.lower()]

    def words(self):
        return set(self._words)


def _srgb(r, g, b):
    return (r / 127.5 - 1.0, g / 127.5 - 1.0, b / 127.5 - 1.0)


DEFAULT_LEXICON = ColorLexicon([
    ("red", _srgb(230, 30, 30)),
    ("orange", _srgb(255, 140, 0)),
    ("yellow", _srgb(250, 215, 10)),
    ("green", _srgb(60, 160, 60)),
    ("dark green", _srgb(0, 90, 0)),
    ("blue", _srgb(40, 80, 220)),
    ("light blue", _srgb(130, 190, 255)),
    ("purple", _srgb(140, 40, 190)),
    ("pink", _srgb(255, 130, 190)),
    ("brown", _srgb(140, 85, 40)),
    ("gray", _srgb(128, 128, 128)),
    ("light gray", _srgb(205, 205, 205)),
    ("black", _srgb(0, 0, 0)),
    ("white", _srgb(255, 255, 255)),
    ("beige", _srgb(235, 215, 180)),
])


def load_lexicon(path) -> ColorLexicon:
    """Read a lexicon from a TOML table: [colors] "light gray" = [r, g, b]."""
    import tomli

    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    entries = [(phrase, _srgb(*rgb)) for phrase, rgb in doc["colors"].items()]
    return ColorLexicon(entries)


# ---------------------------------------------------------------------------
# results

@dataclass
class ColorInstruction:
    instance_ids: list
    part: str        # part noun or None for the body
    color: str
    conditioning_text: str


@dataclass
class BackgroundInstruction:
    components: dict  # {"sky": "blue", ...}


@dataclass
class CompileResult:
    instructions: list
    background: BackgroundInstruction  # or None
    unmatched: list = field(default_factory=list)
    nouns: dict = field(default_factory=dict)  # instance id -> subject noun

    def to_json(self):
        return {
            "instructions": [
                {
                    "instance_ids": list(i.instance_ids),
                    "part": i.part,
                    "color": i.color,
                    "conditioning_text": i.conditioning_text,
                }
                for i in self.instructions
            ],
            "background": dict(self.background.components) if self.background else None,
            "unmatched": list(self.unmatched),
            "nouns": {str(k): v for k, v in self.nouns.items()},
        }


# ---------------------------------------------------------------------------
# tokenization

def _tokenize(text):
    """Lowercased word tokens with character spans."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isalnum():
            j = i
            while j < n and text[j].isalnum():
                j += 1
            out.append((text[i:j].lower(), i, j))
            i = j
        else:
            i += 1
    return out


def _words(text):
    return [t for t, _, _ in _tokenize(text)]


def _lcs_len(a, b):
    # standard two-row dynamic program
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


# ---------------------------------------------------------------------------
# alignment

def _split_sentences(text):
    return [s.strip() for s in text.split(".") if s.strip()]


def align_sentences(original: Caption, edited, table=DEFAULT_CATEGORIES):
    """Match edited sentences to original ones.

    ``edited`` is either raw text (split on '.') or a list of
    (sentence id, text) pairs as sent by the UI, in which case the ids
    are trusted. Raw-text alignment maximizes the total token LCS over
    an injective assignment, with the constraint that an original's
    described classes must all be mentioned by the edited sentence.

    Returns [(sentence id or None, edited text)], in edited order.
    """
    by_id = {s.id: s for s in original.sentences}
    if not isinstance(edited, str):
        pairs = []
        for sid, text in edited:
            if sid is not None and sid not in by_id:
                raise AmbiguousAlignment(f"unknown sentence id {sid}", sentence=sid)
            pairs.append((sid, text.strip().rstrip(".").strip()))
        seen = [sid for sid, _ in pairs if sid is not None]
        if len(seen) != len(set(seen)):
            raise AmbiguousAlignment("duplicate sentence ids in edit")
        return pairs

    forms = surface_forms(table)
    edited_sents = _split_sentences(edited)
    originals = original.sentences

    def described_classes(sent):
        toks = _tokenize(sent.text)
        classes = set()
        for slot in sent.slots:
            if slot.role != "category":
                continue
            for tok, s, e in toks:
                if s >= slot.start and e <= slot.end and tok in forms:
                    classes.add(forms[tok])
        return classes

    def feasible(sent, e_words):
        mentioned = {forms[w] for w in e_words if w in forms}
        return described_classes(sent) <= mentioned

    e_tokens = [_words(t) for t in edited_sents]
    n_e, n_o = len(edited_sents), len(originals)
    INF = -10**6
    score = np.full((n_e, n_o), INF, dtype=np.int64)
    for i in range(n_e):
        for j, sent in enumerate(originals):
            if feasible(sent, e_tokens[i]):
                score[i, j] = _lcs_len(e_tokens[i], _words(sent.text))
    # pad with per-edited "unmatched" columns scoring zero
    full = np.full((n_e, n_o + n_e), 0, dtype=np.int64)
    full[:, :n_o] = score
    rows, cols = linear_sum_assignment(full, maximize=True)
    assign = {}
    for r, c in zip(rows, cols):
        assign[r] = originals[c].id if c < n_o and score[r, c] > INF else None

    taken = {sid for sid in assign.values() if sid is not None}
    for i in range(n_e):
        if assign[i] is None:
            rivals = [originals[j].id for j in range(n_o) if score[i, j] > INF]
            if any(sid in taken for sid in rivals):
                raise AmbiguousAlignment(
                    f"sentence {edited_sents[i]!r} contends for an already "
                    f"matched original",
                    token=edited_sents[i],
                )
    return [(assign[i], edited_sents[i]) for i in range(n_e)]


# ---------------------------------------------------------------------------
# grammar walk

def _match_color(tokens, i, lexicon):
    """Longest lexicon color starting at token i, as (phrase, n_tokens)."""
    for k in range(min(lexicon.max_words, len(tokens) - i), 0, -1):
        phrase = " ".join(t for t, _, _ in tokens[i:i + k])
        if phrase in lexicon:
            return phrase, k
    return None, 0


def _subject_tokens(sentence):
    toks = _tokenize(sentence.text)
    out = []
    for slot in sentence.slots:
        if slot.role != "category":
            continue
        for tok, s, e in toks:
            if s >= slot.start and e <= slot.end:
                out.append(tok)
    return out


def _compile_sentence(sentence, edited_text, lexicon, forms, table):
    """Bindings for one aligned (original, edited) pair.

    Returns (body_color or None, [(part, color), ...], noun). Raises
    structured errors for out-of-grammar edits.
    """
    sid = sentence.id
    o_words = _words(sentence.text)
    o_bigrams = set(zip(o_words, o_words[1:]))
    subject_list = _subject_tokens(sentence)
    subjects = set(subject_list)
    if not subjects:
        raise GrammarError(f"sentence {sid} has no category slot", sentence=sid)
    noun = table.by_id(forms[subject_list[0]]).noun

    tokens = _tokenize(edited_text)
    words = [t for t, _, _ in tokens]
    known = set(o_words) | _STRUCTURAL | set(forms) | lexicon.words()

    body_color = None
    parts = []
    consumed = set()
    i = 0
    while i < len(tokens):
        tok, s, e = tokens[i]
        color, k = _match_color(tokens, i, lexicon)
        if color:
            span = (tokens[i][1], tokens[i + k - 1][2])
            nxt = words[i + k] if i + k < len(words) else None
            prev = words[i - 1] if i > 0 else None
            if nxt in subjects:
                if body_color is not None:
                    raise GrammarError(
                        f"two colors assigned to one subject in sentence {sid}",
                        sentence=sid, token=color, span=span)
                body_color = color
                consumed.add(i + k)
            elif prev in ("is", "are"):
                if body_color is not None:
                    raise GrammarError(
                        f"two colors assigned to one subject in sentence {sid}",
                        sentence=sid, token=color, span=span)
                body_color = color
            elif prev == "with":
                if nxt is None:
                    raise GrammarError(
                        "with-clause missing its part noun",
                        sentence=sid, token=color, span=span)
                if nxt in forms:
                    raise GrammarError(
                        f"color {color!r} applies to referenced category {nxt!r}",
                        sentence=sid, token=nxt)
                parts.append((nxt, color))
                consumed.add(i + k)
            elif nxt in forms:
                raise GrammarError(
                    f"color {color!r} applies to {nxt!r}, which this sentence "
                    f"only references", sentence=sid, token=nxt)
            else:
                raise GrammarError(
                    f"color {color!r} in unsupported position",
                    sentence=sid, token=color, span=span)
            i += k
            continue
        if tok in ("is", "are", "with") and i + 1 < len(words):
            nxt = words[i + 1]
            nxt_is_color = _match_color(tokens, i + 1, lexicon)[0] is not None
            if (not nxt_is_color and (tok, nxt) not in o_bigrams
                    and nxt not in forms and nxt not in _STRUCTURAL):
                raise UnknownColor(
                    f"{nxt!r} is not a known color",
                    sentence=sid, token=nxt,
                    span=(tokens[i + 1][1], tokens[i + 1][2]))
        if tok not in known and i not in consumed:
            if i + 1 < len(words) and words[i + 1] in subjects:
                raise UnknownColor(
                    f"{tok!r} is not a known color", sentence=sid, token=tok,
                    span=(s, e))
            raise GrammarError(
                f"unrecognized token {tok!r}", sentence=sid, token=tok,
                span=(s, e))
        i += 1
    return body_color, parts, noun


def _compile_background(text, lexicon, existing):
    """sky/land/background components of an unaligned sentence.

    Returns a dict of new components, or None when the sentence names
    no component at all (it then goes to the unmatched report).
    """
    tokens = _tokenize(text)
    words = [t for t, _, _ in tokens]
    found = {}
    for i, (tok, s, e) in enumerate(tokens):
        if tok not in BACKGROUND_COMPONENTS:
            continue
        color = None
        # "<component> is <color>"
        if i + 1 < len(words) and words[i + 1] in ("is", "are"):
            phrase, k = _match_color(tokens, i + 2, lexicon)
            if phrase:
                color = phrase
            elif i + 2 < len(words):
                raise UnknownColor(
                    f"{words[i + 2]!r} is not a known color", token=words[i + 2],
                    span=(tokens[i + 2][1], tokens[i + 2][2]))
        # "<color> <component>"
        if color is None:
            for k in range(1, lexicon.max_words + 1):
                if i - k >= 0:
                    phrase = " ".join(words[i - k:i])
                    if phrase in lexicon:
                        color = phrase
                        break
        if color is None:
            raise GrammarError(
                f"background component {tok!r} has no color", token=tok,
                span=(s, e))
        if tok in found or tok in existing:
            raise GrammarError(f"component {tok!r} described twice", token=tok)
        found[tok] = color
    return found or None


def extract_bindings(original: Caption, aligned, lexicon: ColorLexicon = DEFAULT_LEXICON,
                     table=DEFAULT_CATEGORIES) -> CompileResult:
    """Compile aligned sentence pairs into instructions.

    ``aligned`` is the output of :func:`align_sentences`. Sentences
    equal to their original produce nothing; colored edits produce
    ColorInstructions bound to the sentence's instances; unaligned
    sentences feed the background instruction or the unmatched report.
    """
    forms = surface_forms(table)
    by_id = {s.id: s for s in original.sentences}
    instructions = []
    components = {}
    unmatched = []
    nouns = {}

    for sent in original.sentences:
        if sent.slots and any(sl.role == "category" for sl in sent.slots):
            subj = _subject_tokens(sent)[0]
            noun = table.by_id(forms[subj]).noun
            for iid in sent.instance_ids:
                nouns[iid] = noun

    for sid, text in aligned:
        if sid is None:
            comps = _compile_background(text, lexicon, components)
            if comps is None:
                unmatched.append(text)
            else:
                components.update(comps)
            continue
        sent = by_id[sid]
        if _words(text) == _words(sent.text):
            continue
        body_color, parts, noun = _compile_sentence(
            sent, text, lexicon, forms, table)
        ids = list(sent.instance_ids)
        if body_color:
            instructions.append(ColorInstruction(
                instance_ids=ids, part=None, color=body_color,
                conditioning_text=f"{body_color} {noun}"))
        for part, color in parts:
            instructions.append(ColorInstruction(
                instance_ids=ids, part=part, color=color,
                conditioning_text=f"with {color} {part}"))

    background = BackgroundInstruction(components=components) if components else None
    return CompileResult(instructions=instructions, background=background,
                         unmatched=unmatched, nouns=nouns)


def conditioning_for_instance(instance_id, compiled: CompileResult) -> str:
    """The text clause handed to the object generator for one instance."""
    if instance_id not in compiled.nouns:
        raise ValueError(f"unknown instance id {instance_id}")
    body = [i for i in compiled.instructions
            if i.part is None and instance_id in i.instance_ids]
    parts = [i for i in compiled.instructions
             if i.part is not None and instance_id in i.instance_ids]
    if not body and not parts:
        return ""
    pieces = [body[0].conditioning_text if body else compiled.nouns[instance_id]]
    pieces += [p.conditioning_text for p in parts]
    return " ".join(pieces)


def background_conditioning(compiled: CompileResult) -> str:
    """Normalized background clause, e.g. "sky blue land green"."""
    if compiled.background is None:
        return ""
    comps = compiled.background.components
    return " ".join(
        f"{name} {comps[name]}" for name in BACKGROUND_COMPONENTS if name in comps
    )


def compile_edit(original: Caption, edited, lexicon: ColorLexicon = DEFAULT_LEXICON,
                 table=DEFAULT_CATEGORIES) -> CompileResult:
    """align_sentences + extract_bindings in one step."""
    aligned = align_sentences(original, edited, table=table)
    return extract_bindings(original, aligned, lexicon=lexicon, table=table)
