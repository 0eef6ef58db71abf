package demo;

import java.util.regex.Pattern;

class Strings {
    String a = "// import fake.One;";
    String b = "/* not a comment";
    char q = '"';
    String c = "*/ import fake.Two;";
}
class More {
    String d = "x; import fake.Three;";
    String e = "\"; import fake.Four; \"";
}
