"""Catalog grammars: categories of product-name templates over attribute slots.

A template is a list of symbols. ``@key`` draws a value for slot ``key`` of the
category; ``#group`` draws a filler word from a filler group. Each symbol has an
inclusion probability, so one template yields names of varying length.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..text import AV_DELIM, PAIR_DELIM


@dataclass(frozen=True)
class Slot:
    attribute: str          # canonical attribute name
    values: tuple[str, ...]
    alias: str | None = None  # name the slot surfaces under when synonym noise is on

    def surface(self, synonyms: bool) -> str:
        return self.alias if (synonyms and self.alias) else self.attribute


@dataclass(frozen=True)
class Category:
    name: str
    slots: dict[str, Slot]
    fillers: dict[str, tuple[str, ...]]
    templates: tuple[tuple[tuple[str, float], ...], ...]


@dataclass(frozen=True)
class CatalogGrammar:
    categories: tuple[Category, ...]
    weights: tuple[float, ...] = field(default=())

    def validate(self) -> "CatalogGrammar":
        if not self.categories:
            raise ValueError("empty grammar")
        for cat in self.categories:
            if not cat.templates:
                raise ValueError(f"category {cat.name!r} has no templates")
            for slot in cat.slots.values():
                for v in slot.values + (slot.attribute, slot.alias or "x"):
                    if PAIR_DELIM in v or AV_DELIM in v or v != v.lower() or not v.strip():
                        raise ValueError(f"bad lexicon entry {v!r} in {cat.name}")
            for tpl in cat.templates:
                for sym, p in tpl:
                    key = sym[1:]
                    if sym[0] == "@" and key not in cat.slots:
                        raise ValueError(f"{cat.name}: unknown slot {sym}")
                    if sym[0] == "#" and key not in cat.fillers:
                        raise ValueError(f"{cat.name}: unknown filler group {sym}")
                    if not 0.0 <= p <= 1.0:
                        raise ValueError(f"{cat.name}: probability {p} for {sym}")
        return self

    def attributes(self, synonyms: bool = True) -> set[str]:
        return {s.surface(synonyms) for c in self.categories for s in c.slots.values()}


def _t(*items) -> tuple[tuple[str, float], ...]:
    out = []
    for it in items:
        out.append((it, 1.0) if isinstance(it, str) else (it[0], float(it[1])))
    return tuple(out)


COLORS = ("black", "white", "blue", "red", "brown", "grey", "green", "yellow", "pink", "maroon",
          "navy blue", "raging red", "silver", "golden", "orange", "purple", "beige", "sky blue")

MATERIALS = ("stainless steel", "plastic", "brass", "wooden", "cotton", "aluminium", "cast iron",
             "ss", "mild steel", "copper", "rubber", "glass")

USAGES = ("industrial", "office", "kitchen", "packaging", "home", "commercial", "hospital",
          "agricultural", "domestic", "laboratory")


def default_grammar() -> CatalogGrammar:
    headphones = Category(
        "headphones",
        slots={
            "brand": Slot("brand", ("boat", "sony", "jbl", "boult", "noise", "realme", "oneplus", "skullcandy",
                                    "zebronics", "philips", "sennheiser", "ptron")),
            "model": Slot("model name", ("rockerz 255 pro", "rockerz 450", "airdopes 141", "wh 1000xm4",
                                         "tune 510bt", "probass curve", "bullets wireless z2", "buds air 3",
                                         "zeb thunder", "shp 1900", "bassbuds duo")),
            "color": Slot("color", COLORS),
            "conn": Slot("connectivity", ("bluetooth", "wired", "wireless", "usb type c")),
            "htype": Slot("headphone type", ("neckband", "over ear", "in ear", "on ear", "earbuds", "tws")),
            "battery": Slot("battery life", ("20 hours", "30 hours", "40 hours", "8 hours", "60 hours")),
        },
        fillers={"noun": ("headphone", "headset", "earphone"), "adj": ("new", "best", "premium", "original")},
        templates=(
            _t(("@brand", .9), ("@model", .7), ("@color", .5), ("@conn", .6), ("@htype", .7), ("#noun", .4)),
            _t(("#adj", .3), ("@brand", .9), ("@conn", .6), ("@htype", .5), "#noun", ("@color", .4),
               ("@battery", .3)),
        ),
    )
    solar = Category(
        "solar inverter",
        slots={
            "brand": Slot("brand", ("sofar", "luminous", "microtek", "growatt", "havells", "solis", "goodwe",
                                    "delta", "fronius", "waaree"), alias="make"),
            "grid": Slot("grid type", ("ongrid", "offgrid", "hybrid")),
            "model": Slot("model name", ("5.5ktl-x", "3ktl-m", "10ktl-x", "mic 3000tl", "sun 5k", "gw5000d-ns",
                                         "nexus 2kw", "primo 8.2"), alias="model number"),
            "cap": Slot("capacity", ("5.5kw", "3kw", "10kw", "5kw", "8kw", "2kva", "1kva", "15kw")),
            "phase": Slot("phase", ("three phase", "single phase")),
            "warranty": Slot("warranty", ("5 years", "10 years", "2 years", "1 year")),
            "eff": Slot("efficiency", ("98 percent", "97 percent", "96.5 percent")),
        },
        fillers={"noun": ("inverter", "solar inverter", "pcu"), "adj": ("new", "solar", "grid tie")},
        templates=(
            _t(("@brand", .9), ("@grid", .7), "#noun", ("@model", .6), ("@cap", .7), ("@phase", .6)),
            _t(("@brand", .9), ("@cap", .7), ("#adj", .4), "#noun", ("@phase", .5), ("@eff", .3),
               ("@warranty", .3)),
        ),
    )
    cooker = Category(
        "pressure cooker",
        slots={
            "brand": Slot("brand", ("globe", "prestige", "hawkins", "pigeon", "butterfly", "bajaj", "ultra",
                                    "vinod", "milton", "cello")),
            "material": Slot("material", MATERIALS, alias="body material"),
            "ctype": Slot("cooker type", ("induction", "gas stove", "induction base", "outer lid", "inner lid"),
                          alias="type of pressure cookers"),
            "cap": Slot("capacity", ("3 litre", "5 litre", "2 litre", "1.5 litre", "10 litre", "7 litre"),
                        alias="volume"),
            "color": Slot("color", COLORS),
            "handle": Slot("handle type", ("bakelite handle", "steel handle", "side handle")),
        },
        fillers={"noun": ("pressure cooker", "cooker"), "adj": ("new", "heavy", "best")},
        templates=(
            _t(("@brand", .9), ("@material", .7), ("@ctype", .6), "#noun", ("@cap", .6), ("@handle", .3)),
            _t(("@brand", .9), ("@cap", .6), ("@color", .3), ("#adj", .3), "#noun", ("@material", .4)),
        ),
    )
    apparel = Category(
        "women top",
        slots={
            "occasion": Slot("occasion", ("casual", "party", "formal", "festive", "daily wear", "sports")),
            "sleeve": Slot("sleeve type", ("juliet sleeve", "half sleeve", "full sleeve", "sleeveless",
                                           "cap sleeve", "puff sleeve"), alias="sleeves type"),
            "pattern": Slot("pattern", ("solid", "printed", "striped", "floral", "checked", "embroidered")),
            "gender": Slot("gender", ("women", "girls", "ladies")),
            "color": Slot("color", COLORS, alias="shade"),
            "size": Slot("size", ("small", "medium", "large", "xl", "xxl", "free size")),
            "fabric": Slot("fabric", ("cotton", "rayon", "georgette", "crepe", "polyester", "linen")),
            "neck": Slot("neck type", ("round neck", "v neck", "boat neck", "collar neck", "high neck")),
            "fit": Slot("fit", ("regular fit", "slim fit", "loose fit")),
        },
        fillers={"noun": ("top", "kurti", "tunic", "t-shirt"), "adj": ("stylish", "trendy", "new")},
        templates=(
            _t(("@occasion", .6), ("@sleeve", .5), ("@pattern", .6), ("@gender", .7), ("@color", .6), "#noun"),
            _t(("#adj", .3), ("@gender", .7), ("@fabric", .6), ("@neck", .4), ("@pattern", .5), "#noun",
               ("@fit", .3), ("@size", .4)),
        ),
    )
    safety = Category(
        "face mask",
        slots={
            "brand": Slot("brand", ("3m", "venus", "honeywell", "karam", "magnum", "dettol", "savlon")),
            "model": Slot("model name", ("n95", "kn95", "8210", "v410", "9501", "classic", "eco"),
                          alias="model no."),
            "usage": Slot("usage", USAGES, alias="application"),
            "material": Slot("material", ("cotton", "non woven", "polypropylene", "melt blown", "cloth")),
            "layers": Slot("number of layers", ("3 ply", "5 ply", "2 ply", "4 ply")),
            "color": Slot("color", ("white", "black", "blue", "grey", "green")),
            "cert": Slot("certification", ("bis certified", "ce certified", "niosh approved", "iso certified")),
        },
        fillers={"noun": ("mask", "face mask", "respirator"), "adj": ("reusable", "disposable", "safety")},
        templates=(
            _t(("@brand", .9), ("@model", .7), ("@layers", .5), ("#adj", .3), "#noun", ("@usage", .5)),
            _t(("@brand", .9), ("@material", .6), ("@color", .4), "#noun", ("@usage", .4), ("@cert", .3)),
        ),
    )
    furniture = Category(
        "office chair",
        slots={
            "brand": Slot("brand", ("featherlite", "godrej", "nilkamal", "durian", "green soul", "wipro",
                                    "cellbell", "savya home")),
            "material": Slot("material", ("mesh", "leatherette", "fabric", "wooden", "plastic", "metal")),
            "color": Slot("color", COLORS, alias="colour"),
            "usage": Slot("usage", USAGES),
            "ctype": Slot("chair type", ("revolving", "executive", "visitor", "ergonomic", "gaming",
                                         "high back", "mid back")),
            "arm": Slot("armrest", ("with armrest", "adjustable arms", "fixed arms")),
            "base": Slot("base type", ("nylon base", "chrome base", "wooden base")),
        },
        fillers={"noun": ("chair", "office chair", "seat"), "adj": ("comfortable", "modern", "new")},
        templates=(
            _t(("@brand", .9), ("@ctype", .7), ("@material", .5), ("@color", .5), "#noun", ("@arm", .3)),
            _t(("#adj", .3), ("@color", .5), ("@ctype", .6), "#noun", ("@base", .3), ("@usage", .5)),
        ),
    )
    laptop = Category(
        "laptop",
        slots={
            "brand": Slot("brand", ("hp", "dell", "lenovo", "asus", "acer", "apple", "msi", "samsung")),
            "model": Slot("model name", ("pavilion 15", "inspiron 3511", "ideapad slim 3", "vivobook 15",
                                         "aspire 7", "macbook air", "thinkpad e14", "galaxy book 2")),
            "proc": Slot("processor", ("i5", "i3", "i7", "ryzen 5", "ryzen 7", "m1", "celeron")),
            "ram": Slot("ram", ("8gb", "16gb", "4gb", "32gb"), alias="memory"),
            "storage": Slot("storage", ("512gb ssd", "1tb hdd", "256gb ssd", "1tb ssd"), alias="hard disk"),
            "screen": Slot("screen size", ("15.6 inch", "14 inch", "13.3 inch", "17 inch"), alias="display size"),
            "color": Slot("color", ("black", "silver", "grey", "blue", "white")),
            "os": Slot("operating system", ("windows 11", "windows 10", "macos", "dos", "chrome os")),
            "gpu": Slot("graphics card", ("rtx 3050", "gtx 1650", "intel uhd", "radeon vega")),
        },
        fillers={"noun": ("laptop", "notebook"), "adj": ("thin", "refurbished", "new", "gaming")},
        templates=(
            _t(("@brand", .9), ("@model", .7), ("@proc", .6), ("@ram", .5), ("@storage", .4), "#noun"),
            _t(("@brand", .9), ("#adj", .3), "#noun", ("@screen", .5), ("@color", .4), ("@proc", .4),
               ("@gpu", .3), ("@os", .3)),
        ),
    )
    pump = Category(
        "water pump",
        slots={
            "brand": Slot("brand", ("kirloskar", "crompton", "cri", "texmo", "havells", "lubi", "v guard",
                                    "usha", "grundfos"), alias="make"),
            "power": Slot("power", ("1 hp", "0.5 hp", "2 hp", "1.5 hp", "3 hp", "5 hp"), alias="motor power"),
            "phase": Slot("phase", ("single phase", "three phase")),
            "ptype": Slot("pump type", ("submersible", "monoblock", "openwell", "self priming", "centrifugal",
                                        "booster")),
            "usage": Slot("usage", USAGES, alias="application"),
            "material": Slot("material", MATERIALS),
            "voltage": Slot("voltage", ("220v", "240v", "415v", "380v"), alias="operating voltage"),
            "outlet": Slot("outlet size", ("1 inch", "2 inch", "1.5 inch", "3 inch")),
        },
        fillers={"noun": ("pump", "water pump", "motor pump"), "adj": ("heavy duty", "new", "automatic")},
        templates=(
            _t(("@brand", .9), ("@power", .7), ("@ptype", .6), "#noun", ("@phase", .5), ("@voltage", .3)),
            _t(("#adj", .3), ("@brand", .8), ("@material", .5), ("@ptype", .6), "#noun", ("@usage", .4),
               ("@outlet", .3)),
        ),
    )
    cats = (headphones, solar, cooker, apparel, safety, furniture, laptop, pump)
    return CatalogGrammar(cats, weights=(1.0,) * len(cats)).validate()
