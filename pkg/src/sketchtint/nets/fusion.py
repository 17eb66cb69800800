"""Text encoding and recurrent multimodal fusion.

The text side is a plain word LSTM over a fixed number of steps; the
fusion side is a convolutional multimodal LSTM that re-reads the image
features once per word step, together with a normalized coordinate
map, and keeps a spatial hidden state.
"""

from __future__ import annotations

import torch
import torch.nn as nn

PAD_ID = 0
UNK_ID = 1


class Vocabulary:
    """Word-id mapping built from a corpus; 0 is PAD, 1 is UNK."""

    def __init__(self, words):
        self.words = ["<pad>", "<unk>"] + list(words)
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    @classmethod
    def from_texts(cls, texts) -> "Vocabulary":
        seen = sorted({w for t in texts for w in t.lower().split()})
        return cls(seen)

    def encode(self, text: str, steps: int):
        """Fixed-length id list, padded with PAD, truncated at steps."""
        ids = [self.index.get(w, UNK_ID) for w in text.lower().split()]
        ids = ids[:steps]
        return ids + [PAD_ID] * (steps - len(ids))

    def to_json(self):
        return {"words": self.words[2:]}

    @classmethod
    def from_json(cls, doc) -> "Vocabulary":
        return cls(doc["words"])


class TextEncoder(nn.Module):
    """Embedding + LSTM; one hidden vector per step."""

    def __init__(self, vocab_size: int, embed_dim: int, hidden: int,
                 steps: int):
        super().__init__()
        self.vocab_size = vocab_size
        self.steps = steps
        self.embed = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD_ID)
        self.lstm = nn.LSTM(embed_dim, hidden, batch_first=True)

    def forward(self, tokens):
        if tokens.dim() != 2 or tokens.shape[1] != self.steps:
            raise ValueError(
                f"tokens must be (B, {self.steps}), got {tuple(tokens.shape)}"
            )
        if int(tokens.max()) >= self.vocab_size or int(tokens.min()) < 0:
            raise ValueError("token id outside the vocabulary")
        out, _ = self.lstm(self.embed(tokens))
        return out  # (B, steps, hidden)


def coord_map(batch, height, width, dtype, device):
    """2-channel map of x and y positions normalized to [-1, 1]."""
    ys = torch.linspace(-1.0, 1.0, height, dtype=dtype, device=device)
    xs = torch.linspace(-1.0, 1.0, width, dtype=dtype, device=device)
    grid_y = ys.view(1, 1, height, 1).expand(batch, 1, height, width)
    grid_x = xs.view(1, 1, 1, width).expand(batch, 1, height, width)
    return torch.cat([grid_x, grid_y], dim=1)


class RMIFuse(nn.Module):
    """Convolutional multimodal LSTM over the word steps.

    Step input = concat(image features, tiled word hidden, coords);
    all recurrences are 1x1 convolutions; the output is a 1x1
    projection of the final hidden state back to out_ch channels.
    """

    def __init__(self, image_ch: int, text_dim: int, cell: int, out_ch: int,
                 steps: int):
        super().__init__()
        self.steps = steps
        self.cell = cell
        self.image_ch = image_ch
        self.text_dim = text_dim
        in_ch = image_ch + text_dim + 2
        self.conv_x = nn.Conv2d(in_ch, 4 * cell, 1)
        self.conv_h = nn.Conv2d(cell, 4 * cell, 1, bias=False)
        self.proj = nn.Conv2d(cell, out_ch, 1)

    def forward(self, image_feat, word_hiddens):
        if word_hiddens.shape[1] != self.steps:
            raise ValueError(
                f"expected {self.steps} word steps, got {word_hiddens.shape[1]}"
            )
        b, _, h, w = image_feat.shape
        coords = coord_map(b, h, w, image_feat.dtype, image_feat.device)
        hidden = image_feat.new_zeros((b, self.cell, h, w))
        cell = image_feat.new_zeros((b, self.cell, h, w))
        for t in range(self.steps):
            word = word_hiddens[:, t, :, None, None].expand(-1, -1, h, w)
            step_in = torch.cat([image_feat, word, coords], dim=1)
            gates = self.conv_x(step_in) + self.conv_h(hidden)
            i, f, o, g = torch.chunk(gates, 4, dim=1)
            cell = torch.sigmoid(f) * cell + torch.sigmoid(i) * torch.tanh(g)
            hidden = torch.sigmoid(o) * torch.tanh(cell)
        return self.proj(hidden)
