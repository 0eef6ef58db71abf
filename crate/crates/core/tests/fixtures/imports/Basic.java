package org.jabref.logic.importer;

import java.io.IOException;
import java.sql.Connection;
import java.util.*;
import static org.junit.jupiter.api.Assertions.assertEquals;

import org.jabref.model.entry.BibEntry;

public class Basic {
    public void run() throws IOException {
        System.out.println("import nothing;");
    }
}
