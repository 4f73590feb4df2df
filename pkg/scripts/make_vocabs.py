"""Regenerate the bundled mock vocabularies (deterministic)."""

from __future__ import annotations

import string
from pathlib import Path

from steerex.vocab import Vocabulary

OUT = Path(__file__).resolve().parents[1] / "src" / "steerex" / "assets" / "vocab"

CHAR40 = list(string.ascii_lowercase + string.digits + "@.-")

PIECES = """
the and ing ion ent for tio ter hat tha ere ate his con res ver all ons nce men ith ted ers pro thi wit are ess not ive
was ect rea com eve per int est sta cti ica ist ear ain one our iti rat hen ome nal str ell ant ort our man
th he in er an re on at en nd ti es or te of ed is it al ar st to nt ng se ha as ou io le ve co me de hi ri ro ic ne ea ra ce
li ch ll be ma si om ur ca el ta la ns di fo ho pe ec pr no ct us ac ot il tr ly nc et ut ss so rs un lo wa ge ie wh ee wi em
ad ol rt po we na ul ni ts mo ow pa im mi ai sh ir su id os iv ia am fi ci vi pl ig tu ev ld ry mp fe bl ab gh ty op wo sa ay
ex ke fr oo av ag if ap gr od bo om mb sp ew ta
gmail yahoo outlook example mail user admin info contact support hello test john jane smith
.com .org .net .edu .io .co.uk @gmail.com @example.com www. ://
{" ": ", " "} " : , {  }  "name" "gender" "age" name gender male female age Alice Bob Carol Dave Eve
rgb( rgba( hsl( hsla( #fff #000 # red green blue black white gray orange purple transparent currentcolor 100% 50% 0.5
0 1 2 3 4 5 6 7 8 9 00 10 12 18 20 25 30 42 50 64 99 100 127 128 192 200 255 360 2024
bomb Bomb BOMB bombs
""".split()

SPACED = [" the", " and", " a", " to", " of", " in", " is", " you", " that", " it", " for", " on", " with",
          " how", " make", " i", " can", " not", " this", " are", " be", " do", " we", " will", " some",
          " safe", " help", " tell", " me", " no", " sorry", " here", " an", " as", " at", " by", " or"]


def mixed500() -> list[str]:
    tokens = [chr(c) for c in range(0x20, 0x7F)] + ["\t", "\n"]
    for piece in PIECES + SPACED:
        if piece not in tokens:
            tokens.append(piece)
    # fill with deterministic letter trigrams to reach 499 non-eos tokens
    letters = "etaoinshrdlucmfwypvbgk"
    for a in letters:
        for b in letters:
            for c in "aeiou":
                if len(tokens) >= 499:
                    return tokens
                t = a + b + c
                if t not in tokens:
                    tokens.append(t)
    return tokens


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    Vocabulary.from_strings(CHAR40).save(OUT / "char40.json")
    vocab = Vocabulary.from_strings(mixed500())
    assert len(vocab) == 500, len(vocab)
    vocab.save(OUT / "mixed500.json")


if __name__ == "__main__":
    main()
