// Minimal RFC 4180 CSV reader: quoted fields, escaped quotes, CRLF/LF,
// embedded newlines inside quotes.  Returns the header plus row objects.

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): CsvTable {
  const records: string[][] = [];
  let field = "";
  let record: string[] = [];
  let inQuotes = false;
  let i = 0;

  const endField = () => {
    record.push(field);
    field = "";
  };
  const endRecord = () => {
    endField();
    records.push(record);
    record = [];
  };

  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
        } else {
          inQuotes = false;
          i++;
        }
      } else {
        field += ch;
        i++;
      }
    } else if (ch === '"') {
      inQuotes = true;
      i++;
    } else if (ch === ",") {
      endField();
      i++;
    } else if (ch === "\r" && text[i + 1] === "\n") {
      endRecord();
      i += 2;
    } else if (ch === "\n") {
      endRecord();
      i++;
    } else {
      field += ch;
      i++;
    }
  }
  if (inQuotes) throw new Error("unterminated quoted field");
  if (field.length > 0 || record.length > 0) endRecord();

  if (records.length === 0) throw new Error("empty CSV");
  const [header, ...rows] = records;
  for (const [index, row] of rows.entries()) {
    if (row.length !== header.length) {
      throw new Error(`row ${index + 2}: expected ${header.length} fields, got ${row.length}`);
    }
  }
  return { header, rows };
}
