"""Template captioning with explicit sentence-to-instance correspondence.

A caption is built from three ordered parts: one or two weather/time
sentences (W classes), absolute-position sentences for environment
instances (E classes), and relative-position sentences for the rest
(O classes), each sentence carrying the instance ids it describes and
the character spans of its meaningful tokens.

Same-class instances that would produce the same sentence are grouped
into one aggregated sentence ("Two trees are ..."), which also keeps
every sentence in a caption textually unique — raw-text alignment in
the instructions module relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import DEFAULT_CATEGORIES, CategoryTable

QUANTITY_WORDS = [
    "zero", "one", "two", "three", "four", "five",
    "six", "seven", "eight", "nine", "ten",
]

POSITION_PHRASES = {
    (0, 0): "at the top left of the image",
    (0, 1): "at the top of the image",
    (0, 2): "at the top right of the image",
    (1, 0): "on the left of the image",
    (1, 1): "in the center of the image",
    (1, 2): "on the right of the image",
    (2, 0): "at the bottom left of the image",
    (2, 1): "at the bottom of the image",
    (2, 2): "at the bottom right of the image",
}

RELATION_PHRASES = (
    "in front of", "behind", "on the left of", "on the right of",
    "above", "under", "beside",
)

# adjective/time surface forms used by the weather sentences, mapped to
# the category noun they stand for
WEATHER_FORMS = {"sunny": "sun", "cloudy": "cloud", "clouds": "cloud", "night": "moon"}


@dataclass
class Slot:
    start: int
    end: int
    role: str  # quantity | color | category | relation | position | part


@dataclass
class Sentence:
    id: int
    text: str
    instance_ids: list
    slots: list = field(default_factory=list)


@dataclass
class Caption:
    sentences: list

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


def classify_set(label: int, table: CategoryTable = DEFAULT_CATEGORIES) -> str:
    """W, E, or O for a category id."""
    return table.by_id(label).group


def surface_forms(table: CategoryTable = DEFAULT_CATEGORIES) -> dict:
    """token -> category id, covering nouns, plurals and weather forms."""
    forms = {}
    for cat in table:
        forms[cat.noun] = cat.id
        forms[cat.plural] = cat.id
    for form, noun in WEATHER_FORMS.items():
        cat = table.by_form(noun)
        if cat is not None:
            forms.setdefault(form, cat.id)
    return forms


def _twice_center(bbox):
    x, y, bh, bw = bbox
    return 2 * y + bh, 2 * x + bw  # (row, col), doubled to stay integral


def _grid_cell(bbox, image_size):
    ih, iw = image_size
    cy2, cx2 = _twice_center(bbox)
    # center < 1/3 boundary ⟺ 3*center2 < 2*size; ties take the lower cell
    row = 0 if 3 * cy2 <= 2 * ih else (1 if 3 * cy2 <= 4 * ih else 2)
    col = 0 if 3 * cx2 <= 2 * iw else (1 if 3 * cx2 <= 4 * iw else 2)
    return row, col


def absolute_position(bbox, image_size) -> str:
    """3x3-grid position phrase for a bbox center."""
    return POSITION_PHRASES[_grid_cell(bbox, image_size)]


def relative_relation(obj, anchor) -> str:
    """Spatial phrase for obj against an anchor instance.

    Overlapping filled masks read as occlusion order (lower center is
    nearer, so "in front of"); disjoint masks use the dominant axis of
    the center displacement; everything else falls back to "beside".
    """
    from .core import filled_interior

    overlap = bool((filled_interior(obj) & filled_interior(anchor)).any())
    ocy, ocx = _twice_center(obj.bbox)
    acy, acx = _twice_center(anchor.bbox)
    if overlap:
        if ocy > acy:
            return "in front of"
        if ocy < acy:
            return "behind"
        return "beside"
    dx, dy = ocx - acx, ocy - acy
    if abs(dx) > abs(dy):
        return "on the left of" if dx < 0 else "on the right of"
    if abs(dy) > abs(dx):
        return "above" if dy < 0 else "under"
    return "beside"


class _SentenceBuilder:
    """Accumulates text pieces while tracking slot character spans."""

    def __init__(self):
        self.parts = []
        self.slots = []
        self.length = 0

    def add(self, text: str, role: str = None):
        if self.parts:
            self.parts.append(" ")
            self.length += 1
        if role is not None:
            self.slots.append(Slot(self.length, self.length + len(text), role))
        self.parts.append(text)
        self.length += len(text)
        return self

    def finish(self, sid: int, instance_ids) -> Sentence:
        text = "".join(self.parts) + "."
        return Sentence(id=sid, text=text, instance_ids=list(instance_ids),
                        slots=self.slots)


def _quantity(n: int) -> str:
    return QUANTITY_WORDS[n] if n <= 10 else str(n)


def _weather_sentences(groups, table):
    """Fixed weather/time sentence(s) covering all W instances.

    sun (+ clouds) describes a sunny day; moon (+ clouds, when no sun
    took them) a night; clouds alone a cloudy day. A scene holding both
    sun and moon is contradictory but still captioned, one sentence
    each, so the correspondence stays total.
    """
    by_noun = {table.by_id(cid).noun: ids for cid, ids in groups.items()}
    suns = by_noun.get("sun", [])
    moons = by_noun.get("moon", [])
    clouds = by_noun.get("cloud", [])
    out = []
    if suns:
        b = _SentenceBuilder()
        b.add("It").add("is").add("a").add("sunny", role="category").add("day")
        ids = list(suns)
        if clouds:
            b.add("with").add("clouds", role="category")
            ids += clouds
            clouds = []
        out.append((b, ids))
    if moons:
        b = _SentenceBuilder()
        b.add("It").add("is").add("a")
        ids = list(moons)
        if clouds:
            b.add("cloudy", role="category")
            ids += clouds
            clouds = []
        b.add("night", role="category")
        out.append((b, ids))
    if clouds:
        b = _SentenceBuilder()
        b.add("It").add("is").add("a").add("cloudy", role="category").add("day")
        out.append((b, list(clouds)))
    return out


def generate_caption(instances, table: CategoryTable = DEFAULT_CATEGORIES,
                     image_size=None) -> Caption:
    """Deterministic caption over validated instances.

    Sentences run weather, then environment, then objects. Instances
    producing the same sentence text are merged into one aggregated
    sentence, so ids partition exactly over sentences.
    """
    if not instances:
        raise ValueError("cannot caption an empty scene")
    if image_size is None:
        image_size = instances[0].mask.shape
    by_id = {inst.id: inst for inst in instances}

    w_groups, e_insts, o_insts = {}, [], []
    for inst in sorted(instances, key=lambda i: i.id):
        group = classify_set(inst.label, table)
        if group == "W":
            w_groups.setdefault(inst.label, []).append(inst.id)
        elif group == "E":
            e_insts.append(inst)
        else:
            o_insts.append(inst)

    pending = _weather_sentences(w_groups, table)

    # environment: aggregate per (class, grid cell)
    e_groups = {}
    for inst in e_insts:
        key = (inst.label, _grid_cell(inst.bbox, image_size))
        e_groups.setdefault(key, []).append(inst)
    e_order = sorted(e_groups.items(), key=lambda kv: kv[1][0].id)
    # group index for anchor references; position qualifier only needed
    # when a class has several groups
    class_group_count = {}
    for (label, _cell), _members in e_order:
        class_group_count[label] = class_group_count.get(label, 0) + 1

    anchor_ref = {}
    for key, members in e_order:
        label, cell = key
        cat = table.by_id(label)
        noun = cat.noun if len(members) == 1 else cat.plural
        ref = noun
        if class_group_count[label] > 1:
            ref += " " + POSITION_PHRASES[cell]
        anchor_ref[key] = ref

    for key, members in e_order:
        label, cell = key
        cat = table.by_id(label)
        b = _SentenceBuilder()
        if len(members) == 1:
            b.add("There").add("is").add("a")
            b.add(cat.noun, role="category")
        else:
            b.add("There").add("are")
            b.add(_quantity(len(members)), role="quantity")
            b.add(cat.plural, role="category")
        b.add(POSITION_PHRASES[cell], role="position")
        pending.append((b, [m.id for m in members]))

    # objects: nearest environment anchor when one exists, else absolute
    o_groups = {}
    for inst in o_insts:
        if e_insts:
            best = min(
                e_insts,
                key=lambda a: (
                    (_twice_center(a.bbox)[0] - _twice_center(inst.bbox)[0]) ** 2
                    + (_twice_center(a.bbox)[1] - _twice_center(inst.bbox)[1]) ** 2,
                    a.id,
                ),
            )
            akey = (best.label, _grid_cell(best.bbox, image_size))
            rel = relative_relation(inst, best)
            key = ("rel", inst.label, rel, akey)
        else:
            key = ("abs", inst.label, _grid_cell(inst.bbox, image_size))
        o_groups.setdefault(key, []).append(inst)

    for key, members in sorted(o_groups.items(), key=lambda kv: kv[1][0].id):
        cat = table.by_id(members[0].label)
        b = _SentenceBuilder()
        if key[0] == "rel":
            _, _, rel, akey = key
            if len(members) == 1:
                b.add("A").add(cat.noun, role="category")
                b.add("is")
            else:
                b.add(_quantity(len(members)).capitalize(), role="quantity")
                b.add(cat.plural, role="category")
                b.add("are")
            b.add(rel, role="relation")
            b.add("the")
            b.add(anchor_ref[akey])
        else:
            cell = key[2]
            if len(members) == 1:
                b.add("There").add("is").add("a")
                b.add(cat.noun, role="category")
            else:
                b.add("There").add("are")
                b.add(_quantity(len(members)), role="quantity")
                b.add(cat.plural, role="category")
            b.add(POSITION_PHRASES[cell], role="position")
        pending.append((b, [m.id for m in members]))

    sentences = [b.finish(i, ids) for i, (b, ids) in enumerate(pending)]

    covered = [i for s in sentences for i in s.instance_ids]
    if sorted(covered) != sorted(by_id):
        raise AssertionError("caption does not partition the instance ids")
    return Caption(sentences=sentences)


# ---------------------------------------------------------------------------
# serialization

def caption_to_json(caption: Caption) -> dict:
    return {
        "sentences": [
            {
                "id": s.id,
                "text": s.text,
                "instance_ids": list(s.instance_ids),
                "slots": [
                    {"start": sl.start, "end": sl.end, "role": sl.role}
                    for sl in s.slots
                ],
            }
            for s in caption.sentences
        ]
    }


def caption_from_json(doc) -> Caption:
    sentences = []
    for item in doc["sentences"]:
        sentences.append(Sentence(
            id=int(item["id"]),
            text=item["text"],
            instance_ids=[int(v) for v in item["instance_ids"]],
            slots=[Slot(int(sl["start"]), int(sl["end"]), sl["role"])
                   for sl in item["slots"]],
        ))
    return Caption(sentences=sentences)
