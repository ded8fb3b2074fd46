export interface LineRecord {
  id: string;
  gt: string | null;
  ocr: string | null;
}

export type SaveFn = (lineId: string, text: string) => Promise<void>;

/**
 * Line transcription state shared by the overlay and synoptic text views.
 *
 * The input field prefills ground truth, falling back to the OCR result
 * and then to empty. Deselecting a line autosaves its text as ground
 * truth; a failed save keeps the edit locally and flags the line. Lines
 * cycle in reading order and wrap around at either end.
 */
export class TranscriptionSession {
  private index = -1;
  private text_ = "";
  private caret = 0;
  private readonly failed = new Set<string>();
  private readonly pending = new Map<string, string>();

  constructor(
    private readonly lines: LineRecord[],
    private readonly save: SaveFn,
  ) {}

  get activeLine(): LineRecord | null {
    return this.index >= 0 ? this.lines[this.index] : null;
  }

  get text(): string {
    return this.text_;
  }

  select(lineId: string): void {
    const index = this.lines.findIndex((l) => l.id === lineId);
    if (index < 0) throw new Error(`unknown line ${lineId}`);
    this.index = index;
    const line = this.lines[index];
    this.text_ = this.pending.get(line.id) ?? line.gt ?? line.ocr ?? "";
    this.caret = this.text_.length;
  }

  setText(text: string): void {
    this.text_ = text;
    this.caret = Math.min(this.caret, text.length);
  }

  setCaret(position: number): void {
    this.caret = Math.max(0, Math.min(position, this.text_.length));
  }

  /** Virtual-keyboard button press: insert the glyph at the caret. */
  insertAtCaret(glyph: string): void {
    this.text_ = this.text_.slice(0, this.caret) + glyph + this.text_.slice(this.caret);
    this.caret += glyph.length;
  }

  /** Green marks lines whose ground truth is saved and unedited. */
  isGreen(lineId: string): boolean {
    const line = this.lines.find((l) => l.id === lineId);
    return line?.gt != null && !this.failed.has(lineId);
  }

  isFlagged(lineId: string): boolean {
    return this.failed.has(lineId);
  }

  /** Deselection autosaves the field as ground truth. */
  async deselect(): Promise<void> {
    const line = this.activeLine;
    if (!line) return;
    if (line.gt !== this.text_) {
      try {
        await this.save(line.id, this.text_);
        line.gt = this.text_;
        this.failed.delete(line.id);
        this.pending.delete(line.id);
      } catch {
        this.failed.add(line.id);
        this.pending.set(line.id, this.text_); // edit retained for reselection
      }
    }
    this.index = -1;
  }

  private async cycle(step: number): Promise<void> {
    if (this.lines.length === 0) return;
    const from = this.index;
    await this.deselect();
    const n = this.lines.length;
    const next = from < 0 ? (step > 0 ? 0 : n - 1) : (from + step + n) % n;
    this.select(this.lines[next].id);
  }

  /** Shortcut: save the current line and move on, wrapping at the last line. */
  cycleNext(): Promise<void> {
    return this.cycle(1);
  }

  cyclePrev(): Promise<void> {
    return this.cycle(-1);
  }
}
